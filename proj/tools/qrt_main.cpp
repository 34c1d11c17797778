// Command-line driver: runs configured experiment tasks and writes one
// result table per task, with deterministic bytes for identical configs.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "tasks.hpp"

namespace {

int exit_code_for(const qrt::Error& e) {
  const std::string& c = e.code();
  if (c == "ConfigParse") return 2;
  if (c == "ValidationError" || c == "DimensionMismatch" || c == "IndexOutOfRange" ||
      c == "UnknownFunctionTag" || c == "DomainError" || c == "DimensionTooLarge")
    return 3;
  return 4;  // numerical failures
}

void emit_error(const qrt::Error& e, const std::string& path) {
  qrt::Json rec;
  rec["error"] = e.code();
  rec["message"] = e.what();
  if (!path.empty()) rec["path"] = path;
  std::cerr << rec.dump() << "\n";
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string format;
  std::string tolerance_profile;
  bool dump_config = false;
};

int run_tasks(const CommonOpts& opts, const std::vector<std::string>& names,
              qrt::Json extra_task_options = qrt::Json::object()) {
  try {
    qrt::Json cfg = qrt::Json::object();
    if (!opts.config_path.empty()) cfg = qrt::config::parse_file(opts.config_path);
    if (!opts.out_dir.empty()) cfg["output"]["dir"] = opts.out_dir;
    if (!opts.format.empty()) cfg["output"]["format"] = opts.format;
    if (!opts.tolerance_profile.empty())
      cfg["tolerance_profile"] = opts.tolerance_profile;
    for (auto it = extra_task_options.begin(); it != extra_task_options.end(); ++it)
      for (auto jt = it.value().begin(); jt != it.value().end(); ++jt)
        cfg["task"][it.key()][jt.key()] = jt.value();
    if (opts.dump_config) {
      std::cout << qrt::config::dump_normalized(cfg);
      return 0;
    }
    qrt::ExperimentContext ctx = qrt::config::build_context(cfg);
    std::filesystem::create_directories(ctx.out_dir);
    for (const auto& name : names)
      for (const auto& table : qrt::tasks::run_task(ctx, name))
        qrt::io::write_table(table, ctx.out_dir, ctx.format);
    return 0;
  } catch (const qrt::Error& e) {
    emit_error(e, opts.config_path);
    return exit_code_for(e);
  } catch (const std::exception& e) {
    emit_error(qrt::Error("NumericalFailure", e.what()), opts.config_path);
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"response-theory toolbox for finite quantum systems"};
  app.require_subcommand(0, 1);
  app.fallthrough();  // global flags may follow the subcommand name

  CommonOpts opts;
  app.add_option("--config", opts.config_path, "configuration file (text or JSON)");
  app.add_option("--out", opts.out_dir, "output directory");
  app.add_option("--format", opts.format, "output format: csv or json");
  app.add_option("--tolerance-profile", opts.tolerance_profile,
                 "tolerance bundle: strict or numeric");
  app.add_flag("--dump-config", opts.dump_config,
               "print the normalized configuration and exit");

  // `run` executes the task list from the config file
  CLI::App* cmd_run = app.add_subcommand("run", "run the tasks listed in the config");

  struct Sub {
    CLI::App* cmd;
    std::string task;
  };
  std::vector<Sub> subs;
  auto add_plain = [&](const std::string& name, const std::string& help) {
    subs.push_back({app.add_subcommand(name, help), name});
    return subs.back().cmd;
  };
  add_plain("spectrum", "two-point spectral combs for every source pair");
  add_plain("respond", "linear response kernel in time and frequency");
  add_plain("static-susc", "isothermal and fixed-(S,N) susceptibilities");
  CLI::App* cmd_fdr =
      add_plain("fdr-check", "per-line fluctuation-dissipation ratios");
  std::string fdr_f;
  cmd_fdr->add_option("--f", fdr_f, "monotone function tag (default: whole whitelist)");
  CLI::App* cmd_vol =
      add_plain("volterra-check", "prediction error scaling against exact driving");
  std::string vol_orders, vol_amps;
  cmd_vol->add_option("--orders", vol_orders, "comma list, e.g. 1,2");
  cmd_vol->add_option("--amplitudes", vol_amps, "comma list of drive amplitudes");
  add_plain("work-stats", "two-point-measurement work distribution and identities");
  CLI::App* cmd_kk = add_plain("kk", "Kramers-Kronig reconstruction of a response");
  std::string kk_source;
  cmd_kk->add_option("--source", kk_source, "lorentzian | oscillator | comb");
  add_plain("reference-models", "RC circuit and damped oscillator samples");
  CLI::App* cmd_fluid =
      add_plain("fluid-current", "conserved-current response and Ward residuals");
  double fl_sigma = -1.0, fl_d = -1.0, fl_tau = -1.0;
  cmd_fluid->add_option("--sigma", fl_sigma, "conductivity");
  cmd_fluid->add_option("--D", fl_d, "diffusion constant");
  cmd_fluid->add_option("--tau", fl_tau, "relaxation time");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      qrt::Json cfg = qrt::Json::object();
      if (!opts.config_path.empty())
        cfg = qrt::config::parse_file(opts.config_path);
      std::vector<std::string> names;
      for (const auto& t : cfg.value("tasks", qrt::Json::array()))
        names.push_back(t.get<std::string>());
      if (names.empty())
        throw qrt::Error("ValidationError", "config lists no tasks");
      return run_tasks(opts, names);
    }
    for (const auto& sub : subs) {
      if (!sub.cmd->parsed()) continue;
      qrt::Json extra = qrt::Json::object();
      if (sub.task == "fdr-check" && !fdr_f.empty()) extra["fdr-check"]["f"] = fdr_f;
      if (sub.task == "volterra-check") {
        auto split_list = [](const std::string& s) {
          qrt::Json arr = qrt::Json::array();
          std::stringstream ss(s);
          std::string tok;
          while (std::getline(ss, tok, ',')) arr.push_back(std::stod(tok));
          return arr;
        };
        if (!vol_orders.empty()) extra["volterra-check"]["orders"] = split_list(vol_orders);
        if (!vol_amps.empty())
          extra["volterra-check"]["amplitudes"] = split_list(vol_amps);
      }
      if (sub.task == "kk" && !kk_source.empty()) extra["kk"]["source"] = kk_source;
      if (sub.task == "fluid-current") {
        if (fl_sigma >= 0) extra["fluid-current"]["sigma"] = fl_sigma;
        if (fl_d >= 0) extra["fluid-current"]["D"] = fl_d;
        if (fl_tau >= 0) extra["fluid-current"]["tau"] = fl_tau;
      }
      return run_tasks(opts, {sub.task}, extra);
    }
    // no subcommand: --dump-config or usage
    if (opts.dump_config) return run_tasks(opts, {});
    std::cout << app.help();
    return 0;
  } catch (const qrt::Error& e) {
    emit_error(e, opts.config_path);
    return exit_code_for(e);
  }
}
