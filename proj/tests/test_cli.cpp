#include <doctest.h>

#include <json.hpp>

#include <silvaflux/io.hpp>
#include <silvaflux/pipeline.hpp>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

using namespace silvaflux;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = SILVAFLUX_DATA_DIR;
const fs::path kFixtures = SILVAFLUX_FIXTURE_DIR;
const fs::path kCli = SILVAFLUX_CLI;

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("silvaflux_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run run(const std::string& args) {
  const auto dir = fs::temp_directory_path() / "silvaflux_cli_io";
  fs::create_directories(dir);
  const auto out = dir / "stdout", err = dir / "stderr";
  const std::string command =
      "'" + kCli.string() + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int raw = std::system(command.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = io::read_file(out);
  r.err = io::read_file(err);
  return r;
}

Run run_config(const std::string& command, const fs::path& config, const fs::path& out) {
  return run(command + " --config '" + config.string() + "' --out '" + out.string() + "'");
}

// Writes a config whose inputs default to the bundled example files.
fs::path example_config(const fs::path& dir, const std::string& extra_inputs) {
  const auto ge = kData / "grand_est";
  std::string text = "[inputs]\n";
  for (const char* name : {"products", "nodes", "flows", "coefficients", "destinations"})
    if (extra_inputs.find(std::string(name) + " =") == std::string::npos)
      text += std::string(name) + " = \"" + (ge / (std::string(name) + ".csv")).string() + "\"\n";
  text += extra_inputs;
  io::write_file_atomic(dir / "config.toml", text);
  return dir / "config.toml";
}

json error_of(const Run& r) {
  INFO(r.err);
  REQUIRE(r.err.find('\n') == r.err.size() - 1);
  return json::parse(r.err);
}

}  // namespace

TEST_CASE("help and version") {
  auto r = run("--version");
  CHECK(r.status == 0);
  CHECK_FALSE(r.out.empty());
  CHECK(run("--help").status == 0);
  CHECK(run("").status == 2);
  CHECK(run("teleport").status == 2);
  CHECK(run("reconcile").status == 2);
}

TEST_CASE("exit 0: every command on the example data") {
  const auto ge = kData / "grand_est";
  const auto out = scratch("ok");
  for (const auto& [command, config] : std::vector<std::pair<std::string, std::string>>{
           {"convert", "silvaflux.toml"},
           {"reconcile", "silvaflux.toml"},
           {"report", "silvaflux.toml"},
           {"report", "delta_table.cfg.toml"},
           {"carbon", "silvaflux.toml"},
           {"scenario", "scenario_crushing.cfg.toml"},
           {"scenario", "scenario_chemistry.cfg.toml"}}) {
    CAPTURE(command);
    CAPTURE(config);
    const auto r = run_config(command, ge / config, out / (command + "_" + config));
    CHECK(r.status == 0);
    CHECK(r.err.empty());
    CHECK(r.out.find("wrote ") != std::string::npos);
  }
  // Converting the reported units reproduces the baseline flows.
  const auto converted = io::load_flows(out / "convert_silvaflux.toml" / "converted.flows.csv");
  const auto baseline = io::load_flows(ge / "flows.csv");
  REQUIRE(converted.size() == baseline.size());
  for (const auto& f : baseline) {
    auto it = std::find_if(converted.begin(), converted.end(), [&](const Flow& c) { return c.key == f.key; });
    REQUIRE(it != converted.end());
    CHECK(it->quantity == doctest::Approx(f.quantity).epsilon(1e-12));
  }
}

TEST_CASE("scenario files reproduce the worked examples") {
  const auto ge = kData / "grand_est";
  const auto one = run_config("scenario", ge / "scenario_crushing.cfg.toml", scratch("s1"));
  REQUIRE(one.status == 0);
  CHECK(one.out.find("rerouted_volume_m3 96000.000\n") != std::string::npos);
  CHECK(one.out.find("carbon_burned_delta_tC -24000.000\n") != std::string::npos);

  const auto two = run_config("scenario", ge / "scenario_chemistry.cfg.toml", scratch("s2"));
  REQUIRE(two.status == 0);
  CHECK(two.out.find("rerouted_volume_m3 77000.000\n") != std::string::npos);
  CHECK(two.out.find("carbon_burned_delta_tC -19250.000\n") != std::string::npos);
}

TEST_CASE("exit 2: missing files and bad rows") {
  auto r = run_config("report", "/nonexistent/config.toml", scratch("missing"));
  CHECK(r.status == 2);
  auto e = error_of(r);
  CHECK(e["error"] == "MissingFile");
  CHECK(e["path"] == "/nonexistent/config.toml");
  CHECK(e["row"].is_null());

  const auto dir = scratch("badrow");
  io::write_file_atomic(dir / "flows.csv", "id,from,to,product,quantity\nf1,forest,timber,sawlogs,100\n"
                                           "f2,timber,energy,bark,lots\n");
  const auto config = example_config(dir, "flows = \"flows.csv\"\n");
  r = run_config("carbon", config, dir / "out");
  CHECK(r.status == 2);
  e = error_of(r);
  CHECK(e["error"] == "ParseError");
  CHECK(e["path"] == (dir / "flows.csv").string());
  CHECK(e["row"] == 3);
  CHECK_FALSE(fs::exists(dir / "out"));

  io::write_file_atomic(dir / "bad.toml", "[inputs]\nproducts = \"p.csv\"\nmystery = \"m.csv\"\n");
  r = run_config("convert", dir / "bad.toml", dir / "out");
  CHECK(r.status == 2);
  CHECK(error_of(r)["error"] == "ParseError");

  // A command whose config lacks an input it needs.
  io::write_file_atomic(dir / "thin.toml", "[inputs]\n");
  r = run_config("scenario", dir / "thin.toml", dir / "out");
  CHECK(r.status == 2);
  CHECK(error_of(r)["error"] == "InvalidInput");
}

TEST_CASE("exit 3: contradictory exact observations") {
  const auto r = run_config("reconcile", kFixtures / "infeasible" / "silvaflux.toml", scratch("infeasible"));
  CHECK(r.status == 3);
  CHECK(error_of(r)["error"] == "Infeasible");
}

TEST_CASE("exit 4: scenario edits that cannot apply") {
  const auto dir = scratch("edit");
  io::write_file_atomic(dir / "too_much.toml",
                        "[[edit]]\nkind = \"reroute\"\nproduct = \"bark\"\nfrom = \"timber\"\n"
                        "old_to = \"energy\"\nnew_to = \"crushing\"\namount = 1e9\n");
  auto r = run_config("scenario", example_config(dir, "scenario = \"too_much.toml\"\n"), dir / "out");
  CHECK(r.status == 4);
  auto e = error_of(r);
  CHECK(e["error"] == "RerouteExceedsFlow");
  CHECK_FALSE(fs::exists(dir / "out"));

  io::write_file_atomic(dir / "nowhere.toml",
                        "[[edit]]\nkind = \"reroute\"\nproduct = \"bark\"\nfrom = \"timber\"\n"
                        "old_to = \"energy\"\nnew_to = \"atlantis\"\namount = 1\n");
  r = run_config("scenario", example_config(dir, "scenario = \"nowhere.toml\"\n"), dir / "out");
  CHECK(r.status == 4);
  CHECK(error_of(r)["error"] == "UnknownEndpoint");

  io::write_file_atomic(dir / "capped.toml",
                        "[[edit]]\nkind = \"cap_by_deposit\"\nnode = \"crushing\"\nproduct = \"sawdust\"\n"
                        "cap_mass = 1\nyield = 1\n");
  r = run_config("scenario", example_config(dir, "scenario = \"capped.toml\"\n"), dir / "out");
  CHECK(r.status == 4);
  CHECK(error_of(r)["error"] == "CapExceeded");
}

TEST_CASE("reruns are byte-identical") {
  const auto ge = kData / "grand_est";
  for (const char* config : {"scenario_crushing.cfg.toml", "scenario_chemistry.cfg.toml"}) {
    const auto a = scratch("rerun_a"), b = scratch("rerun_b");
    REQUIRE(run_config("scenario", ge / config, a).status == 0);
    REQUIRE(run_config("scenario", ge / config, b).status == 0);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      CAPTURE(entry.path());
      REQUIRE(fs::exists(b / entry.path().filename()));
      CHECK(io::read_file(entry.path()) == io::read_file(b / entry.path().filename()));
      ++files;
    }
    CHECK(files == 7);
  }
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  REQUIRE(run_config("reconcile", ge / "silvaflux.toml", a).status == 0);
  REQUIRE(run_config("reconcile", ge / "silvaflux.toml", b).status == 0);
  CHECK(io::read_file(a / "reconciled.svg") == io::read_file(b / "reconciled.svg"));
  CHECK(io::read_file(a / "reconciled.flows.csv") == io::read_file(b / "reconciled.flows.csv"));
}

TEST_CASE("an empty scenario reproduces the baseline") {
  const auto dir = scratch("empty");
  io::write_file_atomic(dir / "empty.toml", "name = \"nothing\"\n");
  const auto r = run_config("scenario", example_config(dir, "scenario = \"empty.toml\"\n"), dir / "out");
  REQUIRE(r.status == 0);
  const auto ge = kData / "grand_est";
  const auto baseline = io::load_graph(ge / "products.csv", ge / "nodes.csv", ge / "flows.csv");
  CHECK(io::read_file(dir / "out" / "scenario.flows.csv") == io::flows_csv(baseline));
  CHECK(io::read_file(dir / "out" / "scenario.nodes.csv") == io::nodes_csv(baseline));
  const auto diff = io::CsvTable::load(dir / "out" / "scenario.diff.csv");
  for (const auto& row : diff.rows()) CHECK(diff.number(row, "delta") == 0.0);
  const auto ledger = io::CsvTable::load(dir / "out" / "scenario.ledger_delta.csv");
  for (const auto& row : ledger.rows())
    for (std::size_t c = 2; c < ledger.header().size(); ++c) CHECK(std::stod(row.fields[c]) == 0.0);
}

TEST_CASE("pipeline library calls match the binary") {
  const auto ge = kData / "grand_est";
  auto config = load_config(ge / "delta_table.cfg.toml");
  config.out_dir = scratch("lib");
  const auto result = cmd_report(config);
  REQUIRE(result.written.size() == 1);
  const auto bin = scratch("bin");
  REQUIRE(run_config("report", ge / "delta_table.cfg.toml", bin).status == 0);
  CHECK(io::read_file(result.written[0]) == io::read_file(bin / "report.delta.csv"));
  CHECK(exit_code(ErrorCode::NotConverged) == 3);
  CHECK(exit_code(ErrorCode::UnbalancedEdit) == 4);
  CHECK(exit_code(ErrorCode::MissingFile) == 2);
  const auto j = json::parse(error_json(Error(ErrorCode::ParseError, "bad \xff byte", "f.csv", 7)));
  CHECK(j["row"] == 7);
  CHECK(j["path"] == "f.csv");
}

TEST_CASE("command examples") {
  const auto ge = kData / "grand_est";
  SUBCASE("reconciling the example data gives a balanced graph") {
    const auto out = scratch("balanced");
    REQUIRE(run_config("reconcile", ge / "silvaflux.toml", out).status == 0);
    const auto g = io::load_graph(out / "reconciled.products.csv", out / "reconciled.nodes.csv",
                                  out / "reconciled.flows.csv");
    CHECK(is_balanced(g));
    CHECK(g.flows.size() == 24);
  }
  SUBCASE("a missing flows file is named") {
    const auto dir = scratch("noflows");
    const auto r = run_config("reconcile",
                              example_config(dir, "flows = \"absent.csv\"\nobservations = \"" +
                                                      (ge / "observations.csv").string() + "\"\n"),
                              dir / "out");
    CHECK(r.status == 2);
    const auto e = error_of(r);
    CHECK(e["error"] == "MissingFile");
    CHECK(e["path"] == (dir / "absent.csv").string());
  }
  SUBCASE("an empty observed file gives an all-N/A report") {
    const auto dir = scratch("noref");
    io::write_file_atomic(dir / "reference.csv", "target_kind,target_key,value,sigma,source\n");
    const auto r = run_config("report",
                              example_config(dir, "report_rows = \"" + (ge / "report_rows.csv").string() +
                                                      "\"\nreference = \"reference.csv\"\n"),
                              dir / "out");
    REQUIRE(r.status == 0);
    const auto t = io::CsvTable::load(dir / "out" / "report.delta.csv");
    CHECK(t.rows().size() == 11);
    for (const auto& row : t.rows()) {
      CHECK(t.field(row, "reference") == "N/A");
      CHECK(t.field(row, "delta_percent") == "N/A");
    }
  }
}
