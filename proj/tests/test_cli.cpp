#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "exspec/exspec.hpp"

using namespace exspec;
namespace fs = std::filesystem;

namespace {

struct Proc {
  int status = -1;
  std::string out;
};

// Runs the CLI with stderr discarded.
Proc run_cli(const std::string& args) {
  const std::string cmd = std::string(EXSPEC_CLI_PATH) + " " + args + " 2>/dev/null";
  Proc p;
  FILE* f = popen(cmd.c_str(), "r");
  if (!f) return p;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, f)) > 0) p.out.append(buf, got);
  const int raw = pclose(f);
  p.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return p;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("exspec_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Manifest, DefaultsAndRoundTrip) {
  const auto m = parse_manifest(R"({"command":"tail","experiment":"theorem1","seed":5,
                                    "ensemble":{"kind":"PermSumRegular","n":16,"d":3}})");
  EXPECT_EQ(m.ensemble.seed, 5u);
  EXPECT_EQ(m.trials, 1000u);
  EXPECT_EQ(m.format, "json");
  const nlohmann::json j = m;
  const auto back = parse_manifest(j.dump());
  EXPECT_EQ(nlohmann::json(back), j);
}

TEST(Manifest, Rejections) {
  EXPECT_THROW(parse_manifest("{\"command\": "), ParseError);
  EXPECT_THROW(parse_manifest(R"({"comand":"gen"})"), UsageError);
  EXPECT_THROW(parse_manifest(R"({"params":{"dd":1}})"), UsageError);
  EXPECT_THROW(parse_manifest(R"({"trials":"many"})"), UsageError);
  EXPECT_THROW(parse_manifest("[1,2]"), UsageError);
  RunManifest m;
  m.command = "bogus";
  EXPECT_THROW(run_manifest(m), UsageError);
  m.command = "tail";
  m.experiment = "theorem9";
  EXPECT_THROW(run_manifest(m), UsageError);
}

TEST(Manifest, GenIsDeterministicAndCarriesProvenance) {
  const auto m = parse_manifest(R"({"command":"gen","seed":3,"count":2,"index":4,"output_path":"a.json",
                                    "ensemble":{"kind":"RegularDigraph","n":12,"d":3}})");
  const auto a = run_manifest(m);
  const auto b = run_manifest(m, 4);
  ASSERT_EQ(a.files.size(), 4u);
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    EXPECT_EQ(a.files[i].path, b.files[i].path);
    EXPECT_EQ(a.files[i].content, b.files[i].content);
  }
  EXPECT_EQ(a.files[0].path, "a_0.json");
  EXPECT_EQ(a.files[1].path, "a_0.json.provenance.json");
  const auto prov = nlohmann::json::parse(a.files[3].content);
  EXPECT_EQ(prov["index"], 5);
  EXPECT_EQ(prov["seed"], 3);
  EXPECT_EQ(from_json_text(a.files[2].content), sample(m.ensemble, 5));
}

TEST(Manifest, AnalyzeWithInjectedReader) {
  RunManifest m;
  m.command = "analyze";
  m.input = "mem.csv";
  m.d = 2.0;
  const auto reader = [](const std::string&) { return std::string("0,1,1\n1,0,1\n1,1,0\n"); };
  const auto out = run_manifest(m, 0, reader);
  const auto j = nlohmann::json::parse(out.files.at(0).content)["result"];
  EXPECT_EQ(j["n"], 3);
  EXPECT_TRUE(j["constant_margins"].get<bool>());
  EXPECT_NEAR(j["spectra"]["s1"].get<double>(), 2.0, 1e-12);
  EXPECT_NEAR(j["spectra"]["s2"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(j["s2_via_centering"].get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(j["membership"]["member"].get<bool>());
  EXPECT_TRUE(j.contains("scaling"));
}

TEST(Manifest, TailOutputsIndependentOfWorkers) {
  const auto m = parse_manifest(R"({"command":"tail","experiment":"theorem2","seed":8,"trials":40,
                                    "params":{"d":4,"delta":2},
                                    "ensemble":{"kind":"PermSumRegular","n":24,"d":4}})");
  const auto a = run_manifest(m, 1);
  const auto b = run_manifest(m, 3);
  EXPECT_EQ(a.files.at(0).content, b.files.at(0).content);
  EXPECT_EQ(a.manifest_echo, b.manifest_echo);
  EXPECT_EQ(a.exit_code, b.exit_code);
}

TEST(Manifest, MissingParamsIsUsageError) {
  const auto m = parse_manifest(R"({"command":"tail","experiment":"lemma41",
                                    "ensemble":{"kind":"PermSumRegular","n":24,"d":4}})");
  EXPECT_THROW(run_manifest(m), UsageError);
}

TEST(Cli, GenWritesFilesAndRerunsAreIdentical) {
  const auto dir = scratch_dir("gen");
  const std::string out = (dir / "m.csv").string();
  const std::string args = "gen --ensemble PermSumRegular --n 10 --d 3 --seed 4 --format csv --out " + out;
  ASSERT_EQ(run_cli(args).status, 0);
  const std::string first = slurp(out);
  ASSERT_EQ(run_cli(args).status, 0);
  EXPECT_EQ(slurp(out), first);
  EXPECT_TRUE(fs::exists(out + ".provenance.json"));
  const auto a = from_csv(first);
  EXPECT_TRUE(has_constant_margins(a.entries(), 3.0));

  const auto an = run_cli("analyze " + out + " --d 3");
  ASSERT_EQ(an.status, 0);
  const auto j = nlohmann::json::parse(an.out);
  EXPECT_TRUE(j["result"]["constant_margins"].get<bool>());
  EXPECT_NEAR(j["result"]["spectra"]["s1"].get<double>(), 3.0, 1e-9);
}

TEST(Cli, ManifestFileAndFlagsAgree) {
  const auto dir = scratch_dir("manifest");
  {
    std::ofstream f(dir / "run.json");
    f << R"({"command":"tail","experiment":"lemma41","seed":2,"trials":30,"params":{"d":4,"delta":2},
            "ensemble":{"kind":"PermSumRegular","n":32,"d":4}})";
  }
  const auto via_file = run_cli("tail lemma41 --manifest " + (dir / "run.json").string());
  const auto via_flags = run_cli("tail lemma41 --ensemble PermSumRegular --n 32 --d 4 --delta 2 --seed 2 --trials 30");
  ASSERT_EQ(via_file.status, 0);
  ASSERT_EQ(via_flags.status, 0);
  EXPECT_EQ(nlohmann::json::parse(via_file.out)["result"], nlohmann::json::parse(via_flags.out)["result"]);
  EXPECT_EQ(run_cli("gen --manifest " + (dir / "run.json").string()).status, 2);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("verify deg --seed 1").status, 0);
  EXPECT_EQ(run_cli("").status, 2);
  EXPECT_EQ(run_cli("verify bogus").status, 2);
  EXPECT_EQ(run_cli("tail theorem9").status, 2);
  EXPECT_EQ(run_cli("gen --ensemble PermSumRegular --n 4 --d 9").status, 2);
  EXPECT_EQ(run_cli("gen --ensemble PermSumRegular --n 8 --d 2 --format xml").status, 2);
  EXPECT_EQ(run_cli("gen --n eight").status, 2);
  EXPECT_EQ(run_cli("analyze /nonexistent/m.csv").status, 3);
  const auto dir = scratch_dir("codes");
  {
    std::ofstream f(dir / "bad.csv");
    f << "1,2\n3\n";
  }
  EXPECT_EQ(run_cli("analyze " + (dir / "bad.csv").string()).status, 3);
  {
    std::ofstream f(dir / "bad.json");
    f << "{\"command\": ";
  }
  EXPECT_EQ(run_cli("gen --manifest " + (dir / "bad.json").string()).status, 3);
}

TEST(Cli, FailingCurveExitsOne) {
  // Permutation matrices have norm 1, so thresholds above 1 hold trivially. With
  // delta = 0.001 almost no corner is in Deg, while s2(A) >= delta always.
  const auto r = run_cli(
      "tail theorem1 --ensemble PermSumRegular --n 16 --d 1 --seed 3 --trials 200 --c 1 --grid 1.5,2 --format csv");
  EXPECT_EQ(r.status, 0);
  const auto fail = run_cli(
      "tail theorem2 --ensemble PermSumRegular --n 16 --d 2 --delta 0.001 --seed 3 --trials 200 --c 1 --grid 1");
  EXPECT_EQ(fail.status, 1);
}
