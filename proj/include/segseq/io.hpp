#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "segseq/generator.hpp"
#include "segseq/trainer.hpp"
#include "segseq/types.hpp"

namespace segseq {

/// Malformed content: bad JSON, missing or invalid fields, unknown versions.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files that cannot be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and a rename so readers never observe a
/// partial file.
void write_text(const std::filesystem::path& path, const std::string& content);
nlohmann::json read_json(const std::filesystem::path& path);

/// JSON {"sequences": [{"id", "x", "y"}]} or CSV with columns seq_id,x,y.
Dataset read_dataset(const std::filesystem::path& path);
Dataset dataset_from_json(const nlohmann::json& j);
Dataset dataset_from_csv(const std::string& text);
nlohmann::json dataset_to_json(const Dataset& data);

Hyperparams hyperparams_from_json(const nlohmann::json& j);
nlohmann::json hyperparams_to_json(const Hyperparams& hp);

GeneratorSpec generator_spec_from_json(const nlohmann::json& j);

nlohmann::json truth_to_json(const GeneratedData& gen);
std::vector<GroundTruth> truth_from_json(const nlohmann::json& j);

struct Checkpoint {
  ModelState state;
  Hyperparams hyperparams;
};

nlohmann::json checkpoint_to_json(const ModelState& state, const Hyperparams& hp);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

nlohmann::json diagnostics_to_json(const RoundDiagnostics& diag);

nlohmann::json report_to_json(const SegmentReport& report);
SegmentReport report_from_json(const nlohmann::json& j);

/// seq_id,string,f_0..f_{M-1}
std::string features_csv(const SegmentReport& report, std::size_t window);

/// Compact dump with a trailing newline.
std::string dump(const nlohmann::json& j);

}  // namespace segseq
