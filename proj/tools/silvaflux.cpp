// silvaflux: convert, reconcile, scenario, report and carbon steps over the
// file formats in the README.

#include <CLI11.hpp>

#include <silvaflux/pipeline.hpp>

#include <filesystem>
#include <functional>
#include <iostream>

#ifndef SILVAFLUX_VERSION
#define SILVAFLUX_VERSION "0.0.0"
#endif

namespace {

using Command = std::function<silvaflux::CommandResult(const silvaflux::PipelineConfig&)>;

struct Step {
  const char* name;
  const char* help;
  Command run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regional wood-supply-chain flows, scenarios and carbon ledger", "silvaflux"};
  app.set_version_flag("--version", SILVAFLUX_VERSION);
  app.require_subcommand(1);

  const Step steps[] = {
      {"convert", "Convert reported quantities to m3 wood-fibre equivalent", silvaflux::cmd_convert},
      {"reconcile", "Reconcile observations into a balanced flow graph", silvaflux::cmd_reconcile},
      {"scenario", "Apply a scenario file to the baseline graph", silvaflux::cmd_scenario},
      {"report", "Write the delta report against reference statistics", silvaflux::cmd_report},
      {"carbon", "Run the harvested-wood-products carbon ledger", silvaflux::cmd_carbon},
  };

  std::string config_path, out_dir;
  Command selected;
  for (const auto& step : steps) {
    auto* sub = app.add_subcommand(step.name, step.help);
    sub->add_option("--config", config_path, "Pipeline config (TOML)")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
    sub->callback([&selected, &step] { selected = step.run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto config = silvaflux::load_config(config_path);
    if (!out_dir.empty()) config.out_dir = out_dir;
    const auto result = selected(config);
    for (const auto& line : result.summary) std::cout << line << '\n';
    for (const auto& path : result.written) std::cout << "wrote " << path.string() << '\n';
    return 0;
  } catch (const silvaflux::Error& e) {
    std::cerr << silvaflux::error_json(e) << '\n';
    return silvaflux::exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << silvaflux::error_json(silvaflux::Error(silvaflux::ErrorCode::MissingFile, e.what(),
                                                        e.path1().string()))
              << '\n';
    return 2;
  }
}
