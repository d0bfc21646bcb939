#pragma once

// Run manifests and the command runners behind the CLI. A runner is a pure
// function of (manifest, input files): it returns every output document as
// bytes and leaves writing to the caller, so determinism can be checked by
// comparing strings.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "exspec/degree.hpp"
#include "exspec/ensembles.hpp"
#include "exspec/error.hpp"
#include "exspec/matrix_io.hpp"
#include "exspec/report.hpp"
#include "exspec/scaling.hpp"
#include "exspec/spectra.hpp"
#include "exspec/tail.hpp"
#include "exspec/verify.hpp"

namespace exspec {

/// Bad manifest or flag combination (exit status 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

inline const std::vector<std::string>& tail_experiments() {
  static const std::vector<std::string> names{"lemma31", "theorem1", "separately_exchangeable",
                                              "lemma41", "theorem2", "shadows"};
  return names;
}

struct RunManifest {
  std::string command = "gen";  // gen | analyze | verify | tail
  std::string experiment;       // verify suite or tail experiment
  EnsembleSpec ensemble;
  std::optional<double> d;
  std::optional<double> delta;
  double hypothesis_c = 1.0;
  std::vector<double> thresholds;  // tau, or L for theorem2; empty = deciles
  std::vector<double> c_grid;      // lemma31; empty = 0.01..1
  double c = 0.01;
  std::string event = "none";  // theorem1: none | lemma41
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  std::size_t count = 1;  // gen: number of samples
  std::uint64_t index = 0;  // gen: first sample index
  std::string input;        // analyze / lemma31: matrix file
  std::string output_path;  // empty = stdout
  std::string format = "json";
  double svd_tol = kDefaultSvdTol;
  double identity_tol = kIdentityTol;
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  auto opt = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(); };
  j = {{"command", m.command},
       {"experiment", m.experiment},
       {"ensemble", m.ensemble},
       {"params", {{"d", opt(m.d)}, {"delta", opt(m.delta)}, {"C", m.hypothesis_c}}},
       {"grids", {{"thresholds", m.thresholds}, {"c_grid", m.c_grid}, {"c", m.c}}},
       {"event", m.event},
       {"trials", m.trials},
       {"seed", m.seed},
       {"count", m.count},
       {"index", m.index},
       {"input", m.input},
       {"output_path", m.output_path},
       {"format", m.format},
       {"tolerances", {{"svd", m.svd_tol}, {"identity", m.identity_tol}}}};
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw UsageError("unknown manifest field '" + where + it.key() + "'");
}

inline std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace detail

/// Missing fields take the defaults above; the ensemble seed defaults to the
/// run seed. Unknown fields are rejected so typos do not pass silently.
inline void from_json(const nlohmann::json& j, RunManifest& m) {
  if (!j.is_object()) throw UsageError("manifest must be a JSON object");
  detail::reject_unknown(j,
                         {"command", "experiment", "ensemble", "params", "grids", "event", "trials", "seed",
                          "count", "index", "input", "output_path", "format", "tolerances"},
                         "");
  m = RunManifest{};
  m.command = j.value("command", m.command);
  m.experiment = j.value("experiment", m.experiment);
  m.seed = j.value("seed", m.seed);
  if (j.contains("ensemble") && !j.at("ensemble").is_null()) {
    nlohmann::json e = j.at("ensemble");
    detail::reject_unknown(e, {"kind", "n", "d", "zero_diagonal", "seed", "base"}, "ensemble.");
    if (!e.contains("seed") || e.at("seed").is_null()) e["seed"] = m.seed;
    if (!e.contains("kind")) e["kind"] = to_string(m.ensemble.kind);
    if (!e.contains("n")) e["n"] = m.ensemble.n;
    m.ensemble = e.get<EnsembleSpec>();
  } else {
    m.ensemble.seed = m.seed;
  }
  if (j.contains("params")) {
    const auto& p = j.at("params");
    detail::reject_unknown(p, {"d", "delta", "C"}, "params.");
    m.d = detail::opt_double(p, "d");
    m.delta = detail::opt_double(p, "delta");
    m.hypothesis_c = p.value("C", m.hypothesis_c);
  }
  if (j.contains("grids")) {
    const auto& g = j.at("grids");
    detail::reject_unknown(g, {"thresholds", "c_grid", "c"}, "grids.");
    m.thresholds = g.value("thresholds", m.thresholds);
    m.c_grid = g.value("c_grid", m.c_grid);
    m.c = g.value("c", m.c);
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    detail::reject_unknown(t, {"svd", "identity"}, "tolerances.");
    m.svd_tol = t.value("svd", m.svd_tol);
    m.identity_tol = t.value("identity", m.identity_tol);
  }
  m.event = j.value("event", m.event);
  m.trials = j.value("trials", m.trials);
  m.count = j.value("count", m.count);
  m.index = j.value("index", m.index);
  m.input = j.value("input", m.input);
  m.output_path = j.value("output_path", m.output_path);
  m.format = j.value("format", m.format);
}

inline RunManifest parse_manifest(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what(),
                     detail::line_of_offset(text, e.byte));
  }
  try {
    return j.get<RunManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad manifest field: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

struct OutputFile {
  std::string path;  // empty = standard output
  std::string content;
};

struct RunOutput {
  std::vector<OutputFile> files;
  std::string manifest_echo;  // effective manifest, one JSON line
  int exit_code = 0;          // 0 ok, 1 assertion failure
};

/// Reads input files named by the manifest. Replaceable for tests.
using FileReader = std::function<std::string(const std::string&)>;

namespace detail {

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// "key,value" rows from the flattened JSON scalars.
inline std::string flat_csv(const nlohmann::json& j) {
  std::string out = "key,value\n";
  const auto flat = j.flatten();
  for (auto it = flat.begin(); it != flat.end(); ++it) {
    const auto& v = it.value();
    std::string text;
    if (v.is_number_float()) text = format_double(v.get<double>());
    else if (v.is_string()) text = v.get<std::string>();
    else text = v.dump();
    out += it.key() + ',' + text + '\n';
  }
  return out;
}

/// `path` with `_<i>` before the extension.
inline std::string indexed_path(const std::string& path, std::uint64_t i) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  const std::string stem = has_ext ? path.substr(0, dot) : path;
  const std::string ext = has_ext ? path.substr(dot) : "";
  return stem + "_" + std::to_string(i) + ext;
}

inline void require_format(const RunManifest& m) {
  if (m.format != "json" && m.format != "csv")
    throw UsageError("format must be json or csv, got '" + m.format + "'");
}

inline RegularityParams require_params(const RunManifest& m, const std::string& what) {
  if (!m.d || !m.delta) throw UsageError(what + " needs --d and --delta");
  try {
    return RegularityParams(*m.d, *m.delta);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

inline void validate_ensemble(const EnsembleSpec& s) {
  try {
    s.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

inline OutputFile document(const RunManifest& m, const nlohmann::json& manifest, const nlohmann::json& result,
                           const std::string& csv) {
  if (m.format == "csv") return {m.output_path, csv};
  return {m.output_path, dump({{"manifest", manifest}, {"result", result}})};
}

inline RunOutput run_gen(const RunManifest& m, const nlohmann::json& manifest) {
  validate_ensemble(m.ensemble);
  if (m.count < 1) throw UsageError("count must be >= 1");
  RunOutput out;
  for (std::uint64_t k = 0; k < m.count; ++k) {
    const std::uint64_t idx = m.index + k;
    const SquareMatrix a = sample(m.ensemble, idx);
    std::string path = m.output_path;
    if (!path.empty() && m.count > 1) path = indexed_path(path, k);
    out.files.push_back({path, m.format == "csv" ? to_csv(a) : to_json_text(a)});
    const nlohmann::json prov = {{"seed", m.ensemble.seed}, {"index", idx}, {"spec", m.ensemble}};
    out.files.push_back({path.empty() ? "" : path + ".provenance.json", dump(prov)});
  }
  return out;
}

inline RunOutput run_analyze(const RunManifest& m, const nlohmann::json& manifest, const FileReader& read) {
  if (m.input.empty()) throw UsageError("analyze needs an input matrix file");
  const std::string text = read(m.input);
  const SquareMatrix a = has_suffix(m.input, ".json") ? from_json_text(text) : from_csv(text);
  nlohmann::json r;
  r["n"] = a.n();
  r["zero_diagonal"] = a.has_zero_diagonal();
  const auto spec = singular_values(a, m.svd_tol);
  r["spectra"] = spectra_json(spec);
  const Vector u = column_sums(a), v = row_sums(a);
  r["margins"] = {{"u", vector_json(u)}, {"v", vector_json(v)}};
  const double d_margin = m.d ? *m.d : u(0);
  const bool constant = is_nonnegative(a.entries()) && has_constant_margins(a.entries(), d_margin, m.identity_tol);
  r["constant_margins"] = constant;
  if (constant) {
    r["d_margin"] = d_margin;
    const double s2c = s2_via_centering(a, d_margin, m.svd_tol, m.identity_tol);
    r["s2_via_centering"] = s2c;
    r["centering_gap"] = std::abs(s2c - spec.s2());
  }
  if (m.d) {
    const RegularityParams p(*m.d, m.delta.value_or(1.0));
    r["membership"] = deg_membership(DegreeProfile(u, v), p);
    if (is_nonnegative(a.entries()) && (u.array() > 0.0).all() && (v.array() > 0.0).all())
      r["scaling"] = scaling_reduction(a, p.d, p.delta, m.identity_tol);
  }
  RunOutput out;
  out.files.push_back(document(m, manifest, r, flat_csv(r)));
  return out;
}

inline RunOutput run_verify_cmd(const RunManifest& m, const nlohmann::json& manifest) {
  const std::string suite = m.experiment.empty() ? "all" : m.experiment;
  VerifyReport rep;
  try {
    rep = run_verify(suite, m.seed);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  std::string csv = "name,passed,detail\n";
  for (const auto& c : rep.checks) csv += '"' + c.name + "\"," + (c.passed ? "1" : "0") + ",\"" + c.detail + "\"\n";
  RunOutput out;
  out.files.push_back(document(m, manifest, rep, csv));
  out.exit_code = rep.passed() ? 0 : 1;
  return out;
}

inline std::string lemma31_csv(const Lemma31Result& r) {
  std::string out = "c,p_hat,ci\n";
  for (std::size_t i = 0; i < r.c_grid.size(); ++i)
    out += format_double(r.c_grid[i]) + ',' + format_double(r.p_hat[i]) + ',' + format_double(r.ci[i]) + '\n';
  return out;
}

inline std::string ks_csv(const std::vector<KsComparison>& ks) {
  std::string out = "name,statistic,critical,passed\n";
  for (const auto& k : ks)
    out += '"' + k.name + "\"," + format_double(k.statistic) + ',' + format_double(k.critical) + ',' +
           (k.passed() ? "1" : "0") + '\n';
  return out;
}

inline RunOutput run_tail(const RunManifest& m, const nlohmann::json& manifest, const FileReader& read,
                          std::size_t workers) {
  const std::string& e = m.experiment;
  if (std::find(tail_experiments().begin(), tail_experiments().end(), e) == tail_experiments().end())
    throw UsageError("unknown tail experiment '" + e +
                     "' (expected lemma31, theorem1, separately_exchangeable, lemma41, theorem2 or shadows)");
  if (m.trials < 1) throw UsageError("trials must be >= 1");
  RunOutput out;
  auto emit = [&](const nlohmann::json& result, const std::string& csv) {
    out.files.push_back(document(m, manifest, result, csv));
  };
  auto guard = [](auto&& f) {
    try {
      return f();
    } catch (const DomainError& err) {
      throw UsageError(err.what());
    }
  };
  if (e == "lemma31") {
    std::optional<SquareMatrix> a;
    if (!m.input.empty()) {
      const std::string text = read(m.input);
      a = has_suffix(m.input, ".json") ? from_json_text(text) : from_csv(text);
    } else {
      validate_ensemble(m.ensemble);
      a = sample(m.ensemble, 0);
    }
    const auto grid = m.c_grid.empty() ? default_c_grid() : m.c_grid;
    const auto r = guard([&] { return lemma31_fraction(*a, m.trials, m.seed, workers, grid); });
    nlohmann::json j = r;
    j["constant"] = ConstantEstimate{"c_lemma31", r.best_c, "max grid c with p_hat + ci >= c", m.trials};
    emit(j, lemma31_csv(r));
    return out;
  }
  validate_ensemble(m.ensemble);
  if (e == "theorem1") {
    CornerEvent ev;
    if (m.event == "lemma41") {
      const auto p = require_params(m, "event lemma41");
      ev = CornerEvent::near_constant_margins(p.d, p.delta);
    } else if (m.event != "none") {
      throw UsageError("event must be none or lemma41, got '" + m.event + "'");
    }
    const auto r = guard([&] { return theorem1_curve(m.ensemble, m.c, m.thresholds, m.trials, m.seed, ev, workers); });
    nlohmann::json j = r;
    j["constant"] = ConstantEstimate{"c_thm1", r.best_c, "largest grid c holding at every threshold", m.trials};
    emit(j, to_csv(r.curve));
    out.exit_code = r.curve.all_hold() ? 0 : 1;
  } else if (e == "separately_exchangeable") {
    const auto r = guard([&] { return separately_exchangeable_curve(m.ensemble, m.thresholds, m.trials, m.seed, workers); });
    emit(r, to_csv(r));
    out.exit_code = r.all_hold() ? 0 : 1;
  } else if (e == "lemma41") {
    const auto p = require_params(m, "lemma41");
    const auto r = guard([&] { return lemma41_frequency(m.ensemble, p.d, p.delta, m.trials, m.seed, m.hypothesis_c, workers); });
    const nlohmann::json j = r;
    emit(j, flat_csv(j));
  } else if (e == "theorem2") {
    const auto p = require_params(m, "theorem2");
    const auto r = guard([&] {
      return theorem2_curve(m.ensemble, p.d, p.delta, m.thresholds, m.trials, m.seed, m.c, m.hypothesis_c, true, workers);
    });
    nlohmann::json j = r;
    j["constant"] = ConstantEstimate{"c_thm2", r.best_c, "largest grid c holding at every L", m.trials};
    emit(j, to_csv(r.curve));
    const bool proof_ok = r.max_relabel_gap <= 1e-9 * std::max(1.0, *m.d) && r.row_chain_violations == 0 &&
                          r.delta_chain_violations == 0;
    out.exit_code = r.curve.all_hold() && proof_ok ? 0 : 1;
  } else {  // shadows
    auto ks = guard([&] { return relabeling_shadows(m.ensemble, m.trials, m.seed, workers); });
    if (m.ensemble.kind == EnsembleKind::kSeparatelyExchangeable) {
      const auto blocks = block_shadows(m.ensemble, m.trials, workers);
      ks.insert(ks.end(), blocks.begin(), blocks.end());
    }
    emit(ks, ks_csv(ks));
    out.exit_code = std::all_of(ks.begin(), ks.end(), [](const KsComparison& k) { return k.passed(); }) ? 0 : 1;
  }
  return out;
}

}  // namespace detail

/// Runs one manifest. `workers` = 0 uses default_workers(); outputs do not
/// depend on it.
inline RunOutput run_manifest(const RunManifest& m, std::size_t workers = 0,
                              const FileReader& read = read_text_file) {
  detail::require_format(m);
  const nlohmann::json manifest = m;
  RunOutput out;
  if (m.command == "gen") {
    out = detail::run_gen(m, manifest);
  } else if (m.command == "analyze") {
    out = detail::run_analyze(m, manifest, read);
  } else if (m.command == "verify") {
    out = detail::run_verify_cmd(m, manifest);
  } else if (m.command == "tail") {
    out = detail::run_tail(m, manifest, read, workers);
  } else {
    throw UsageError("unknown command '" + m.command + "' (expected gen, analyze, verify or tail)");
  }
  out.manifest_echo = manifest.dump() + "\n";
  return out;
}

}  // namespace exspec
