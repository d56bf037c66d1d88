#include "segseq/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>
#include <unordered_map>

#include "segseq/features.hpp"

namespace segseq {

using nlohmann::json;

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

const json& field(const json& obj, const std::string& key, const std::string& prefix) {
  if (!obj.is_object()) throw SchemaError("'" + (prefix.empty() ? std::string("<root>") : prefix) + "' must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError("missing field '" + join(prefix, key) + "'");
  return *it;
}

double number(const json& obj, const std::string& key, const std::string& prefix) {
  const json& v = field(obj, key, prefix);
  if (!v.is_number()) throw SchemaError("field '" + join(prefix, key) + "' must be a number");
  return v.get<double>();
}

std::uint64_t count(const json& obj, const std::string& key, const std::string& prefix) {
  const json& v = field(obj, key, prefix);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw SchemaError("field '" + join(prefix, key) + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<double> numbers(const json& v, const std::string& name) {
  if (!v.is_array()) throw SchemaError("field '" + name + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw SchemaError("field '" + name + "' must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::size_t> indices(const json& v, const std::string& name) {
  if (!v.is_array()) throw SchemaError("field '" + name + "' must be an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<std::int64_t>() < 0) {
      throw SchemaError("field '" + name + "' must contain non-negative integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& prefix) {
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) throw SchemaError("unknown field '" + join(prefix, key) + "'");
  }
}

void check_version(const json& obj, const std::string& what, bool required) {
  auto it = obj.find("version");
  if (it == obj.end()) {
    if (required) throw SchemaError(what + ": missing field 'version'");
    return;
  }
  if (!it->is_number_integer() || it->get<int>() != kSchemaVersion) {
    throw SchemaError(what + ": unsupported 'version' " + it->dump() + " (expected " + std::to_string(kSchemaVersion) +
                      ")");
  }
}

LogNormalPrior prior_from_json(const json& j, const std::string& prefix) {
  reject_unknown(j, {"mu", "sigma"}, prefix);
  return {number(j, "mu", prefix), number(j, "sigma", prefix)};
}

json prior_to_json(const LogNormalPrior& p) { return {{"mu", p.mu}, {"sigma", p.sigma}}; }

KernelParams kernel_from_json(const json& j, const std::string& prefix) {
  reject_unknown(j, {"amp2", "ls2"}, prefix);
  return {number(j, "amp2", prefix), number(j, "ls2", prefix)};
}

json kernels_to_json(const std::vector<KernelParams>& kernels) {
  json out = json::array();
  for (const auto& k : kernels) out.push_back({{"amp2", k.amp2}, {"ls2", k.ls2}});
  return out;
}

std::vector<KernelParams> kernels_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw SchemaError("field '" + name + "' must be an array");
  std::vector<KernelParams> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(kernel_from_json(j[k], name + "[" + std::to_string(k) + "]"));
  return out;
}

// std::invalid_argument messages from validate() already name the field.
template <typename F>
void rethrow_as_schema(F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  const auto parent = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  if (!std::filesystem::is_directory(parent)) {
    throw IoError("output directory '" + parent.string() + "' does not exist (writing '" + path.string() + "')");
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

Dataset dataset_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("dataset must be a JSON object");
  check_version(j, "dataset", false);
  reject_unknown(j, {"version", "sequences"}, "");
  const json& seqs = field(j, "sequences", "");
  if (!seqs.is_array()) throw SchemaError("field 'sequences' must be an array");
  Dataset data;
  for (std::size_t d = 0; d < seqs.size(); ++d) {
    const std::string prefix = "sequences[" + std::to_string(d) + "]";
    const json& s = seqs[d];
    reject_unknown(s, {"id", "x", "y"}, prefix);
    const json& id = field(s, "id", prefix);
    if (!id.is_string()) throw SchemaError("field '" + prefix + ".id' must be a string");
    data.push_back({id.get<std::string>(), numbers(field(s, "x", prefix), prefix + ".x"),
                    numbers(field(s, "y", prefix), prefix + ".y")});
  }
  return data;
}

json dataset_to_json(const Dataset& data) {
  json seqs = json::array();
  for (const auto& s : data) seqs.push_back({{"id", s.id}, {"x", s.x}, {"y", s.y}});
  return {{"version", kSchemaVersion}, {"sequences", seqs}};
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV dataset is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "seq_id,x,y") throw SchemaError("CSV header must be 'seq_id,x,y'");
  Dataset data;
  std::unordered_map<std::string, std::size_t> pos;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, xs, ys;
    if (!std::getline(row, id, ',') || !std::getline(row, xs, ',') || !std::getline(row, ys)) {
      throw SchemaError("CSV line " + std::to_string(lineno) + " must have 3 columns");
    }
    double x = 0.0, y = 0.0;
    try {
      std::size_t used = 0;
      x = std::stod(xs, &used);
      if (used != xs.size()) throw std::invalid_argument(xs);
      y = std::stod(ys, &used);
      if (used != ys.size()) throw std::invalid_argument(ys);
    } catch (const std::exception&) {
      throw SchemaError("CSV line " + std::to_string(lineno) + " has a non-numeric x or y");
    }
    auto [it, inserted] = pos.try_emplace(id, data.size());
    if (inserted) data.push_back({id, {}, {}});
    data[it->second].x.push_back(x);
    data[it->second].y.push_back(y);
  }
  return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return dataset_from_csv(read_text(path));
  return dataset_from_json(read_json(path));
}

Hyperparams hyperparams_from_json(const json& j) {
  // Every field is optional; absent ones keep the library defaults.
  Hyperparams hp;
  reject_unknown(j,
                 {"version", "lambda", "alpha0", "M", "lognormal_amp", "lognormal_ls", "lognormal_noise", "gibbs",
                  "mstep", "outer", "seed", "active_threshold", "standardize"},
                 "");
  check_version(j, "hyperparams", false);
  auto num = [](const json& obj, const char* key, const std::string& prefix, double& out) {
    if (obj.contains(key)) out = number(obj, key, prefix);
  };
  auto cnt = [](const json& obj, const char* key, const std::string& prefix, auto& out) {
    if (obj.contains(key)) out = static_cast<std::remove_reference_t<decltype(out)>>(count(obj, key, prefix));
  };
  auto section = [&](const char* key, std::initializer_list<const char*> allowed) -> const json& {
    static const json empty = json::object();
    if (!j.contains(key)) return empty;
    const json& sub = j[key];
    if (!sub.is_object()) throw SchemaError(std::string("field '") + key + "' must be an object");
    reject_unknown(sub, allowed, key);
    return sub;
  };

  num(j, "lambda", "", hp.lambda);
  num(j, "alpha0", "", hp.alpha0);
  cnt(j, "M", "", hp.num_kernels);
  if (j.contains("lognormal_amp")) hp.lognormal_amp = prior_from_json(j["lognormal_amp"], "lognormal_amp");
  if (j.contains("lognormal_ls")) hp.lognormal_ls = prior_from_json(j["lognormal_ls"], "lognormal_ls");
  if (j.contains("lognormal_noise")) hp.lognormal_noise = prior_from_json(j["lognormal_noise"], "lognormal_noise");

  const json& g = section("gibbs", {"num_samples", "burn_in", "thinning", "sweeps_per_round"});
  cnt(g, "num_samples", "gibbs", hp.gibbs.num_samples);
  cnt(g, "burn_in", "gibbs", hp.gibbs.burn_in);
  cnt(g, "thinning", "gibbs", hp.gibbs.thinning);
  cnt(g, "sweeps_per_round", "gibbs", hp.gibbs.sweeps_per_round);

  const json& ms = section("mstep", {"max_iters", "step_size", "grad_tol", "rel_tol"});
  cnt(ms, "max_iters", "mstep", hp.mstep.max_iters);
  num(ms, "step_size", "mstep", hp.mstep.step_size);
  num(ms, "grad_tol", "mstep", hp.mstep.grad_tol);
  num(ms, "rel_tol", "mstep", hp.mstep.rel_tol);

  const json& o = section("outer", {"max_rounds", "elbo_rel_tol", "vem_cycles"});
  cnt(o, "max_rounds", "outer", hp.outer.max_rounds);
  num(o, "elbo_rel_tol", "outer", hp.outer.elbo_rel_tol);
  cnt(o, "vem_cycles", "outer", hp.outer.vem_cycles);

  cnt(j, "seed", "", hp.seed);
  num(j, "active_threshold", "", hp.active_threshold);
  if (j.contains("standardize")) {
    if (!j["standardize"].is_boolean()) throw SchemaError("field 'standardize' must be a boolean");
    hp.standardize = j["standardize"].get<bool>();
  }
  rethrow_as_schema([&] { hp.validate(); });
  return hp;
}

json hyperparams_to_json(const Hyperparams& hp) {
  return {{"lambda", hp.lambda},
          {"alpha0", hp.alpha0},
          {"M", hp.num_kernels},
          {"lognormal_amp", prior_to_json(hp.lognormal_amp)},
          {"lognormal_ls", prior_to_json(hp.lognormal_ls)},
          {"lognormal_noise", prior_to_json(hp.lognormal_noise)},
          {"gibbs",
           {{"num_samples", hp.gibbs.num_samples},
            {"burn_in", hp.gibbs.burn_in},
            {"thinning", hp.gibbs.thinning},
            {"sweeps_per_round", hp.gibbs.sweeps_per_round}}},
          {"mstep",
           {{"max_iters", hp.mstep.max_iters},
            {"step_size", hp.mstep.step_size},
            {"grad_tol", hp.mstep.grad_tol},
            {"rel_tol", hp.mstep.rel_tol}}},
          {"outer",
           {{"max_rounds", hp.outer.max_rounds},
            {"elbo_rel_tol", hp.outer.elbo_rel_tol},
            {"vem_cycles", hp.outer.vem_cycles}}},
          {"seed", hp.seed},
          {"active_threshold", hp.active_threshold},
          {"standardize", hp.standardize}};
}

GeneratorSpec generator_spec_from_json(const json& j) {
  reject_unknown(j, {"version", "seed", "dt", "beta", "kernels", "sequences", "segmentation"}, "");
  check_version(j, "generator spec", false);
  GeneratorSpec spec;
  spec.seed = count(j, "seed", "");
  if (j.contains("dt")) spec.dt = number(j, "dt", "");
  if (j.contains("beta")) spec.beta = number(j, "beta", "");
  spec.kernels = kernels_from_json(field(j, "kernels", ""), "kernels");
  const json& seqs = field(j, "sequences", "");
  if (!seqs.is_array()) throw SchemaError("field 'sequences' must be an array");
  for (std::size_t d = 0; d < seqs.size(); ++d) {
    const std::string prefix = "sequences[" + std::to_string(d) + "]";
    reject_unknown(seqs[d], {"id", "horizon"}, prefix);
    const json& id = field(seqs[d], "id", prefix);
    if (!id.is_string()) throw SchemaError("field '" + prefix + ".id' must be a string");
    spec.sequences.push_back({id.get<std::string>(), number(seqs[d], "horizon", prefix)});
  }
  const json& seg = field(j, "segmentation", "");
  const json& type = field(seg, "type", "segmentation");
  if (type == "random") {
    reject_unknown(seg, {"type", "lambda", "pi", "alpha0"}, "segmentation");
    spec.lambda = number(seg, "lambda", "segmentation");
    if (seg.contains("pi")) spec.pi = numbers(seg["pi"], "segmentation.pi");
    if (seg.contains("alpha0")) spec.alpha0 = number(seg, "alpha0", "segmentation");
  } else if (type == "fixed") {
    reject_unknown(seg, {"type", "segments"}, "segmentation");
    const json& segs = field(seg, "segments", "segmentation");
    if (!segs.is_array()) throw SchemaError("field 'segmentation.segments' must be an array");
    std::vector<FixedSegments> fixed;
    for (std::size_t d = 0; d < segs.size(); ++d) {
      const std::string prefix = "segmentation.segments[" + std::to_string(d) + "]";
      reject_unknown(segs[d], {"starts", "labels"}, prefix);
      fixed.push_back({indices(field(segs[d], "starts", prefix), prefix + ".starts"),
                       indices(field(segs[d], "labels", prefix), prefix + ".labels")});
    }
    spec.fixed = std::move(fixed);
  } else {
    throw SchemaError("field 'segmentation.type' must be \"random\" or \"fixed\"");
  }
  rethrow_as_schema([&] { spec.validate(); });
  return spec;
}

json truth_to_json(const GeneratedData& gen) {
  json records = json::array();
  for (const auto& t : gen.truth) {
    records.push_back({{"seq_id", t.seq_id},
                       {"boundaries", t.boundaries},
                       {"labels", t.labels},
                       {"kernels", kernels_to_json(gen.kernels)},
                       {"beta", gen.beta}});
  }
  return {{"version", kSchemaVersion}, {"truth", records}};
}

std::vector<GroundTruth> truth_from_json(const json& j) {
  check_version(j, "ground truth", true);
  const json& records = field(j, "truth", "");
  if (!records.is_array()) throw SchemaError("field 'truth' must be an array");
  std::vector<GroundTruth> out;
  for (std::size_t d = 0; d < records.size(); ++d) {
    const std::string prefix = "truth[" + std::to_string(d) + "]";
    const json& r = records[d];
    const json& id = field(r, "seq_id", prefix);
    if (!id.is_string()) throw SchemaError("field '" + prefix + ".seq_id' must be a string");
    out.push_back({id.get<std::string>(), indices(field(r, "boundaries", prefix), prefix + ".boundaries"),
                   indices(field(r, "labels", prefix), prefix + ".labels")});
  }
  return out;
}

json checkpoint_to_json(const ModelState& state, const Hyperparams& hp) {
  json frozen = json::array();
  for (bool f : state.frozen) frozen.push_back(f);
  return {{"version", kSchemaVersion},
          {"kernels", kernels_to_json(state.kernels)},
          {"beta", state.beta},
          {"alpha", state.alpha},
          {"frozen", frozen},
          {"hyperparams", hyperparams_to_json(hp)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("model checkpoint must be a JSON object");
  check_version(j, "model checkpoint", true);
  reject_unknown(j, {"version", "kernels", "beta", "alpha", "frozen", "hyperparams"}, "");
  Checkpoint cp;
  cp.state.kernels = kernels_from_json(field(j, "kernels", ""), "kernels");
  cp.state.beta = number(j, "beta", "");
  cp.state.alpha = numbers(field(j, "alpha", ""), "alpha");
  cp.hyperparams = hyperparams_from_json(field(j, "hyperparams", ""));
  const std::size_t m = cp.state.kernels.size();
  if (m != cp.hyperparams.num_kernels) throw SchemaError("checkpoint 'kernels' length does not match 'hyperparams.M'");
  if (cp.state.alpha.size() != m) throw SchemaError("checkpoint 'alpha' length does not match 'kernels'");
  cp.state.frozen.assign(m, false);
  if (j.contains("frozen")) {
    const json& f = j["frozen"];
    if (!f.is_array() || f.size() != m) throw SchemaError("checkpoint 'frozen' must have one flag per kernel");
    for (std::size_t k = 0; k < m; ++k) cp.state.frozen[k] = f[k].get<bool>();
  }
  if (!(cp.state.beta > 0.0)) throw SchemaError("checkpoint 'beta' must be positive");
  for (std::size_t k = 0; k < m; ++k) {
    if (!(cp.state.kernels[k].amp2 > 0.0) || !(cp.state.kernels[k].ls2 > 0.0)) {
      throw SchemaError("checkpoint kernels[" + std::to_string(k) + "] must have positive parameters");
    }
    if (!(cp.state.alpha[k] > 0.0)) throw SchemaError("checkpoint 'alpha' entries must be positive");
  }
  return cp;
}

json diagnostics_to_json(const RoundDiagnostics& diag) {
  return {{"round", diag.round},
          {"objective", diag.objective},
          {"alpha", diag.alpha},
          {"active_kernels", diag.active_kernels},
          {"mean_segments", diag.mean_segments},
          {"wallclock_ms", diag.wallclock_ms},
          {"line_search_failed", diag.line_search_failed}};
}

json report_to_json(const SegmentReport& report) {
  json seqs = json::array();
  for (const auto& s : report.sequences) {
    json samples = json::array();
    for (const auto& smp : s.samples) samples.push_back({{"starts", smp.starts}, {"labels", smp.labels}});
    seqs.push_back({{"seq_id", s.seq_id},
                    {"num_points", s.num_points},
                    {"marginal_split_prob", s.marginal_split_prob},
                    {"samples", samples}});
  }
  return {{"version", kSchemaVersion}, {"num_kernels", report.num_kernels}, {"sequences", seqs}};
}

SegmentReport report_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("segmentation report must be a JSON object");
  check_version(j, "segmentation report", true);
  SegmentReport report;
  report.num_kernels = count(j, "num_kernels", "");
  if (report.num_kernels == 0) throw SchemaError("field 'num_kernels' must be positive");
  const json& seqs = field(j, "sequences", "");
  if (!seqs.is_array()) throw SchemaError("field 'sequences' must be an array");
  for (std::size_t d = 0; d < seqs.size(); ++d) {
    const std::string prefix = "sequences[" + std::to_string(d) + "]";
    const json& s = seqs[d];
    SequenceReport seq;
    const json& id = field(s, "seq_id", prefix);
    if (!id.is_string()) throw SchemaError("field '" + prefix + ".seq_id' must be a string");
    seq.seq_id = id.get<std::string>();
    seq.num_points = count(s, "num_points", prefix);
    seq.marginal_split_prob = numbers(field(s, "marginal_split_prob", prefix), prefix + ".marginal_split_prob");
    const json& samples = field(s, "samples", prefix);
    if (!samples.is_array()) throw SchemaError("field '" + prefix + ".samples' must be an array");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::string sp = prefix + ".samples[" + std::to_string(i) + "]";
      SampleLabels smp{indices(field(samples[i], "starts", sp), sp + ".starts"),
                       indices(field(samples[i], "labels", sp), sp + ".labels")};
      if (smp.starts.size() != smp.labels.size()) throw SchemaError("'" + sp + "' needs one label per segment");
      for (std::size_t l : smp.labels) {
        if (l >= report.num_kernels) throw SchemaError("'" + sp + ".labels' exceeds 'num_kernels'");
      }
      seq.samples.push_back(std::move(smp));
    }
    report.sequences.push_back(std::move(seq));
  }
  return report;
}

std::string features_csv(const SegmentReport& report, std::size_t window) {
  std::ostringstream os;
  os << "seq_id,string";
  for (std::size_t m = 0; m < report.num_kernels; ++m) os << ",f_" << m;
  os << '\n';
  os.precision(17);
  for (const auto& seq : report.sequences) {
    const auto labels = cluster_labels(seq, report.num_kernels, window);
    const auto freq = frequency_vector(labels, report.num_kernels);
    os << seq.seq_id << ',' << encode_labels(labels);
    for (double f : freq) os << ',' << f;
    os << '\n';
  }
  return os.str();
}

}  // namespace segseq
