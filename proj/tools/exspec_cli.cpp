// exspec: generate ensembles, analyze matrices, run verification suites and
// tail experiments. Flags build a manifest; --manifest FILE overrides them.
//
// Exit status: 0 ok, 1 assertion failure, 2 usage, 3 I/O.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "exspec/exspec.hpp"

namespace {

struct Flags {
  std::optional<std::string> ensemble;
  std::optional<long long> n;
  std::optional<double> d;
  std::optional<double> delta;
  std::optional<double> hypothesis_c;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> grid;
  std::optional<double> c;
  std::optional<std::string> event;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> index;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::string> manifest;
  std::optional<bool> zero_diagonal;
  std::optional<double> svd_tol;
  std::optional<double> identity_tol;
  std::string positional;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--ensemble", f.ensemble, "PermutedBase | SeparatelyExchangeable | PermSumRegular | RegularDigraph");
  app->add_option("--n", f.n, "matrix dimension");
  app->add_option("--d", f.d, "degree / margin parameter");
  app->add_option("--delta", f.delta, "regularity parameter delta");
  app->add_option("--C", f.hypothesis_c, "constant in the large-degree and l2 hypotheses");
  app->add_option("--trials", f.trials, "Monte Carlo trials");
  app->add_option("--seed", f.seed, "run seed (also the ensemble seed unless the manifest sets one)");
  app->add_option("--grid", f.grid, "comma-separated thresholds (tau or L), or c values for lemma31");
  app->add_option("--c", f.c, "comparison constant c");
  app->add_option("--event", f.event, "theorem1 conditioning event: none | lemma41");
  app->add_option("--count", f.count, "gen: number of samples");
  app->add_option("--index", f.index, "gen: first sample index");
  app->add_option("--zero-diagonal", f.zero_diagonal, "ensemble zero-diagonal flag");
  app->add_option("--out", f.out, "output path (default: standard output)");
  app->add_option("--format", f.format, "json | csv");
  app->add_option("--manifest", f.manifest, "manifest JSON; its fields override flags");
  app->add_option("--svd-tol", f.svd_tol, "singular value tolerance");
  app->add_option("--identity-tol", f.identity_tol, "identity assertion tolerance");
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw exspec::UsageError("--grid entry '" + item + "' is not a number");
      }
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

nlohmann::json flags_json(const std::string& command, const Flags& f) {
  nlohmann::json j;
  j["command"] = command;
  if (command == "verify" || command == "tail") {
    if (!f.positional.empty()) j["experiment"] = f.positional;
  } else if (command == "analyze") {
    if (!f.positional.empty()) j["input"] = f.positional;
  }
  nlohmann::json e = nlohmann::json::object();
  if (f.ensemble) e["kind"] = *f.ensemble;
  if (f.n) e["n"] = *f.n;
  if (f.d && std::floor(*f.d) == *f.d) e["d"] = static_cast<int>(*f.d);
  if (f.zero_diagonal) e["zero_diagonal"] = *f.zero_diagonal;
  if (!e.empty()) j["ensemble"] = e;
  if (f.d || f.delta || f.hypothesis_c) {
    nlohmann::json p = nlohmann::json::object();
    if (f.d) p["d"] = *f.d;
    if (f.delta) p["delta"] = *f.delta;
    if (f.hypothesis_c) p["C"] = *f.hypothesis_c;
    j["params"] = p;
  }
  if (f.grid || f.c) {
    nlohmann::json g = nlohmann::json::object();
    if (f.grid) g[command == "tail" && f.positional == "lemma31" ? "c_grid" : "thresholds"] = parse_grid(*f.grid);
    if (f.c) g["c"] = *f.c;
    j["grids"] = g;
  }
  if (f.svd_tol || f.identity_tol) {
    nlohmann::json t = nlohmann::json::object();
    if (f.svd_tol) t["svd"] = *f.svd_tol;
    if (f.identity_tol) t["identity"] = *f.identity_tol;
    j["tolerances"] = t;
  }
  if (f.trials) j["trials"] = *f.trials;
  if (f.seed) j["seed"] = *f.seed;
  if (f.event) j["event"] = *f.event;
  if (f.count) j["count"] = *f.count;
  if (f.index) j["index"] = *f.index;
  if (f.out) j["output_path"] = *f.out;
  if (f.format) j["format"] = *f.format;
  return j;
}

int run(const std::string& command, const Flags& f) {
  nlohmann::json j = flags_json(command, f);
  if (f.manifest) {
    const std::string text = exspec::read_text_file(*f.manifest);
    nlohmann::json file;
    try {
      file = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw exspec::ParseError(std::string("manifest is not valid JSON: ") + e.what(),
                               exspec::detail::line_of_offset(text, e.byte));
    }
    if (file.contains("command") && file["command"] != command)
      throw exspec::UsageError("manifest command '" + file["command"].dump() + "' differs from '" + command + "'");
    j.merge_patch(file);
  }
  const auto manifest = exspec::parse_manifest(j.dump());
  const auto out = exspec::run_manifest(manifest);
  bool to_stdout = false;
  for (const auto& file : out.files) {
    if (file.path.empty()) {
      std::cout << file.content;
      to_stdout = true;
    } else {
      exspec::write_text_file(file.path, file.content);
    }
  }
  (to_stdout ? std::cerr : std::cout) << out.manifest_echo;
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exchangeable-matrix spectral experiments"};
  app.require_subcommand(1);
  Flags flags;
  auto* gen = app.add_subcommand("gen", "sample matrices from an ensemble");
  auto* analyze = app.add_subcommand("analyze", "spectral and margin report for one matrix file");
  auto* verify = app.add_subcommand("verify", "run an invariant suite: subset | scaling | perron | deg | all");
  auto* tail = app.add_subcommand(
      "tail", "tail experiment: lemma31 | theorem1 | separately_exchangeable | lemma41 | theorem2 | shadows");
  analyze->add_option("input", flags.positional, "matrix file (.csv or .json)");
  verify->add_option("suite", flags.positional, "suite name")->default_val("all");
  tail->add_option("experiment", flags.positional, "experiment name");
  for (auto* sub : {gen, analyze, verify, tail}) add_common(sub, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, flags);
  } catch (const exspec::IoError& e) {
    std::cerr << "exspec: " << e.what() << "\n";
    return 3;
  } catch (const exspec::ParseError& e) {
    std::cerr << "exspec: " << e.what() << "\n";
    return 3;
  } catch (const exspec::UsageError& e) {
    std::cerr << "exspec: " << e.what() << "\n";
    return 2;
  } catch (const exspec::DomainError& e) {
    std::cerr << "exspec: " << e.what() << "\n";
    return 2;
  } catch (const exspec::DimensionError& e) {
    std::cerr << "exspec: " << e.what() << "\n";
    return 2;
  } catch (const exspec::CombinatorialError& e) {
    std::cerr << "exspec: " << e.what() << "\n";
    return 2;
  } catch (const exspec::Error& e) {
    std::cerr << "exspec: " << e.what() << "\n";
    return 1;
  }
}
