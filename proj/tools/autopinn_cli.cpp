#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "autopinn/config.hpp"
#include "autopinn/errors.hpp"

namespace {

/// Dedicated flags stay strings so presence is detectable and value errors
/// carry the flag's name through the config resolver.
struct ConfigFlags {
  std::string config_path;
  std::string problem, mode, net, activation, seed, jobs, out_dir, reference;
  std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("config", f.config_path, "config file of key = value lines");
  cmd->add_option("--problem", f.problem,
                  "helmholtz2d | burgers1d | poisson<n>d");
  cmd->add_option("--mode", f.mode, "full | preset | bo-only | train-only");
  cmd->add_option("--net", f.net, "network family");
  cmd->add_option("--activation", f.activation, "activation name");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--jobs", f.jobs,
                  "parallel workers for the initial search trials");
  cmd->add_option("--out-dir", f.out_dir, "artifact directory");
  cmd->add_option("--reference", f.reference, "truth dataset path");
  cmd->add_option("--set", f.sets,
                  "extra key=value override, repeatable; flags win over the "
                  "config file");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<autopinn::ConfigEntry> flag_entries(const ConfigFlags& f,
                                                const CLI::App* cmd) {
  std::vector<autopinn::ConfigEntry> out;
  const auto flag = [&](const char* opt, const char* key,
                        const std::string& value) {
    if (cmd->count(opt) > 0)
      out.push_back({key, value, std::string("flag ") + opt, true});
  };
  flag("--problem", "problem", f.problem);
  flag("--mode", "mode", f.mode);
  flag("--net", "net", f.net);
  flag("--activation", "activation", f.activation);
  flag("--seed", "seed", f.seed);
  flag("--jobs", "jobs", f.jobs);
  flag("--out-dir", "out_dir", f.out_dir);
  flag("--reference", "reference", f.reference);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw autopinn::ValidationError("flag --set: expected key=value, got '" +
                                      s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty() || value.empty())
      throw autopinn::ValidationError("flag --set: expected key=value, got '" +
                                      s + "'");
    out.push_back({key, value, "flag --set " + key, true});
  }
  return out;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return std::string(buf);
}

std::string arch_label(const autopinn::RunReport& rep) {
  return to_string(rep.kind) + " " + std::to_string(rep.h.layers) + "x" +
         std::to_string(rep.h.width) + " " + to_string(rep.activation);
}

void print_summary(const autopinn::RunReport& rep, const std::string& out_dir) {
  std::cout << rep.problem << "  " << arch_label(rep) << "  seed " << rep.seed
            << "\n";
  std::cout << "row: lr " << rep.h.lr << "  n_domain " << rep.h.n_domain
            << "  n_boundary " << rep.h.n_boundary;
  if (rep.h.n_initial) std::cout << "  n_initial " << *rep.h.n_initial;
  std::cout << "  w_R " << rep.h.w_R << "  w_B " << rep.h.w_B;
  if (rep.h.w_I) std::cout << "  w_I " << *rep.h.w_I;
  std::cout << "\n";
  for (const auto& s : rep.stages) {
    char line[96];
    std::snprintf(line, sizeof(line), "%s  l2 %.6e  (%.1f s)", s.name.c_str(),
                  s.l2, s.wall_seconds);
    std::cout << line << "\n";
  }
  if (!rep.failed_stage.empty()) {
    std::cout << "aborted in " << rep.failed_stage << "\n";
    return;
  }
  std::cout << "final l2 " << sci(rep.final_l2) << "  params "
            << rep.param_count << "  samples " << rep.n_domain << "+"
            << rep.n_boundary;
  if (rep.n_initial > 0) std::cout << "+" << rep.n_initial;
  if (rep.n_rar_added > 0) std::cout << " (+" << rep.n_rar_added << " refined)";
  std::cout << "\n";
  if (!out_dir.empty()) std::cout << "artifacts in " << out_dir << "\n";
}

int command_run(const ConfigFlags& f, const CLI::App* cmd) {
  autopinn::RunConfig c =
      autopinn::parse_config(f.config_path, flag_entries(f, cmd));
  if (c.out_dir.empty())
    throw autopinn::ValidationError(
        "run needs an artifact directory (set out_dir = <dir> or pass "
        "--out-dir)");
  std::filesystem::create_directories(c.out_dir);
  {
    // Echo the resolved config first so even an aborted run is reproducible.
    std::ofstream out(c.out_dir + "/config", std::ios::binary);
    out << autopinn::serialize_config(c);
    if (!out) throw autopinn::RuntimeError("cannot write " + c.out_dir + "/config");
  }
  const autopinn::RunReport rep = autopinn::run_config(c);
  print_summary(rep, c.out_dir);
  if (!rep.failed_stage.empty()) {
    std::cerr << "error: training aborted in " << rep.failed_stage << "\n";
    return 3;
  }
  return 0;
}

int command_report(const std::vector<std::string>& dirs) {
  using Row = std::vector<std::string>;
  std::vector<Row> rows;
  rows.push_back({"run", "problem", "arch", "params", "iters", "stage1",
                  "stage2", "stage3", "final l2", "status"});
  for (const auto& d : dirs) {
    std::filesystem::path p(d);
    if (std::filesystem::is_directory(p)) p /= "report";
    const autopinn::RunReport rep = autopinn::read_run_report(p.string());
    auto label = std::filesystem::path(d).lexically_normal().filename().string();
    if (label.empty() || label == ".")
      label = std::filesystem::path(d).lexically_normal().parent_path()
                  .filename().string();
    if (label.empty()) label = d;
    Row row{label, rep.problem, arch_label(rep),
            std::to_string(rep.param_count),
            std::to_string(rep.plan.pretrain_iters + rep.plan.stage2_iters +
                           rep.plan.stage3_iters)};
    for (const char* stage : {"stage1", "stage2", "stage3"}) {
      std::string cell = "-";
      for (const auto& s : rep.stages)
        if (s.name == stage) cell = sci(s.l2);
      row.push_back(cell);
    }
    row.push_back(rep.failed_stage.empty() ? sci(rep.final_l2) : "-");
    row.push_back(rep.failed_stage.empty() ? "ok"
                                           : "failed " + rep.failed_stage);
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      width[i] = std::max(width[i], row[i].size());
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      line += row[i];
      if (i + 1 < row.size())
        line += std::string(width[i] - row[i].size() + 2, ' ');
    }
    std::cout << line << "\n";
  }
  return 0;
}

int command_validate(const ConfigFlags& f, const CLI::App* cmd) {
  std::cout << autopinn::serialize_config(
      autopinn::parse_config(f.config_path, flag_entries(f, cmd)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-adaptive PDE network benchmark runner"};
  app.require_subcommand(1);
  ConfigFlags run_flags, validate_flags;
  std::vector<std::string> report_dirs;
  CLI::App* run_cmd = app.add_subcommand(
      "run", "execute the configured pipeline and write artifacts");
  add_config_flags(run_cmd, run_flags);
  CLI::App* report_cmd = app.add_subcommand(
      "report", "render a comparison table from finished runs");
  report_cmd->add_option("dirs", report_dirs, "run directories or report files")
      ->required();
  CLI::App* validate_cmd = app.add_subcommand(
      "validate", "parse a config and echo its resolved form");
  add_config_flags(validate_cmd, validate_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (run_cmd->parsed()) return command_run(run_flags, run_cmd);
    if (report_cmd->parsed()) return command_report(report_dirs);
    return command_validate(validate_flags, validate_cmd);
  } catch (const autopinn::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
