// Runs one study described by a config file.
//
//   solve --config study.cfg [--csv levels.csv] [--dump-mesh out/]
//
// --dump-mesh writes mesh_<level>.txt (brick snapshot) and indicators_<level>.csv per level.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "stfem/bench.hpp"

int main(int argc, char** argv) {
  CLI::App app{"space-time FEM study driver"};
  std::string config, csv, dump;
  app.add_option("--config", config, "study config (key = value lines)")->required();
  app.add_option("--csv", csv, "per-level CSV output");
  app.add_option("--dump-mesh", dump, "directory for mesh snapshots and indicator CSVs");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "no per-level progress on stderr");
  CLI11_PARSE(app, argc, argv);

  try {
    const stfem::StudyConfig cfg = stfem::load_study_config(config);
    if (!dump.empty()) std::filesystem::create_directories(dump);
    auto on_level = [&](const stfem::LevelView& v) {
      const stfem::LevelRecord& r = v.record;
      if (!quiet) {
        std::fprintf(stderr, "level %d: N_h %d, elements %d, error %.4e, I_eff %.3f, its %d, %.2fs\n",
                     r.level, r.num_dofs, r.num_elements, r.error_h, r.eff_index, r.iterations,
                     r.wall_time);
      }
      if (dump.empty()) return;
      const auto base = std::filesystem::path(dump);
      std::ofstream mesh(base / ("mesh_" + std::to_string(r.level) + ".txt"));
      v.space.mesh().write_snapshot(mesh);
      std::ofstream ind(base / ("indicators_" + std::to_string(r.level) + ".csv"));
      stfem::write_indicator_csv(ind, v.space, v.estimate.indicators);
      if (!mesh || !ind) throw std::runtime_error("cannot write to " + dump);
    };
    const stfem::StudyReport report = stfem::run_study(cfg, on_level);
    if (!csv.empty()) {
      std::ofstream out(csv);
      stfem::write_study_csv(out, report.record);
      if (!out) throw std::runtime_error("cannot write " + csv);
    }
    stfem::write_summary(std::cout, cfg, report);
    return report.record.failure.empty() ? 0 : 1;
  } catch (const stfem::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == stfem::ErrorKind::config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
