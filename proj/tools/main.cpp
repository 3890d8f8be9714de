#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "imtsforge/baseline_eval.hpp"
#include "imtsforge/datasets_io.hpp"
#include "imtsforge/float_text.hpp"
#include "imtsforge/generator.hpp"
#include "imtsforge/kernels.hpp"
#include "imtsforge/systems_registry.hpp"

namespace {

// exit codes: 0 success, 1 user error, 2 internal error, 3 all grid points rejected
constexpr int kExitOk = 0;
constexpr int kExitUserError = 1;
constexpr int kExitInternalError = 2;
constexpr int kExitAllRejected = 3;

struct CommonOptions {
    std::string systems_dir;
    std::size_t jobs = 1;
};

imts::systems::Registry make_registry(const CommonOptions& common) {
    auto registry = imts::systems::Registry::with_builtins();
    std::string dir = common.systems_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("IMTS_FORGE_SYSTEMS_DIR")) dir = env;
    }
    if (!dir.empty()) registry.load_directory(dir);
    return registry;
}

void add_common(CLI::App* cmd, CommonOptions& common) {
    cmd->add_option("--systems-dir", common.systems_dir,
                    "directory of *.ode system definitions loaded at startup");
    cmd->add_option("--jobs", common.jobs, "worker thread count (results are independent of it)")
        ->check(CLI::PositiveNumber);
}

void print_difficulty(const imts::grad::DifficultyReport& report) {
    std::cout << "aggregated_jgd " << imts::format_double(report.aggregated_jgd) << "\n";
    for (std::size_t c = 0; c < report.per_channel_jgd.size(); ++c) {
        std::cout << "channel " << c << " jgd " << imts::format_double(report.per_channel_jgd[c])
                  << " mpgd " << imts::format_double(report.per_channel_mpgd[c]) << " mgd_mean "
                  << imts::format_double(report.per_channel_mgd_mean[c]) << "\n";
    }
}

double resolve_noise_std(std::optional<double> noise_std, std::optional<double> noise_var,
                         double fallback) {
    if (noise_std && noise_var) {
        throw CLI::ValidationError("--noise-std and --noise-var are mutually exclusive");
    }
    if (noise_var) return std::sqrt(*noise_var);
    if (noise_std) return *noise_std;
    return fallback;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw imts::io::IoError("cannot write " + path.string());
    out << content;
}

std::vector<imts::eval::BaselineMode> parse_baselines(const std::vector<std::string>& names) {
    std::vector<imts::eval::BaselineMode> modes;
    if (names.empty()) {
        modes = {imts::eval::BaselineMode::history_mean,
                 imts::eval::BaselineMode::last_observation,
                 imts::eval::BaselineMode::global_train_mean};
    } else {
        for (const auto& name : names) modes.push_back(imts::eval::baseline_by_name(name));
    }
    return modes;
}

std::string evaluation_csv(const std::string& dataset_name,
                           const imts::eval::EvaluationReport& report) {
    std::string csv = "dataset,baseline,fold,mse\n";
    for (const auto& baseline : report.baselines) {
        for (std::size_t f = 0; f < baseline.fold_mse.size(); ++f) {
            csv += dataset_name + "," + std::string(imts::eval::baseline_name(baseline.mode)) +
                   "," + std::to_string(f) + "," + imts::format_double(baseline.fold_mse[f]) +
                   "\n";
        }
    }
    return csv;
}

imts::eval::EvaluationReport run_evaluation(const imts::Dataset& dataset,
                                            const std::vector<imts::eval::BaselineMode>& modes,
                                            int folds, std::optional<double> split_fraction,
                                            std::uint64_t seed, bool noisy_targets) {
    const double fraction = split_fraction.value_or(dataset.meta.split_fraction);
    return imts::eval::evaluate(dataset, modes, folds, fraction, seed, noisy_targets);
}

void print_evaluation(const imts::eval::EvaluationReport& report) {
    std::cout << "baseline            mean_mse     std_mse\n";
    for (const auto& baseline : report.baselines) {
        std::string name(imts::eval::baseline_name(baseline.mode));
        name.resize(20, ' ');
        std::cout << name << imts::format_double(baseline.mean_mse) << "  "
                  << imts::format_double(baseline.std_mse) << "\n";
    }
    if (report.skipped_empty_horizon > 0) {
        std::cout << "skipped_empty_horizon " << report.skipped_empty_horizon << "\n";
    }
}

int run(int argc, char** argv) {
    CLI::App app{"ODE-derived irregularly sampled time-series benchmark forge"};
    app.require_subcommand(1);

    // ---- list-systems ----
    CommonOptions list_common;
    auto* list_cmd = app.add_subcommand("list-systems", "list registered ODE systems");
    add_common(list_cmd, list_common);

    // ---- score ----
    CommonOptions score_common;
    std::string score_system;
    imts::gen::GeneratorConfig score_config_value;
    double score_sigma_dur_units = 1.0;
    auto* score_cmd = app.add_subcommand("score", "score one spread configuration");
    add_common(score_cmd, score_common);
    score_cmd->add_option("system", score_system, "system name")->required();
    score_cmd->add_option("--sigma-initial", score_config_value.spread.sigma_initial,
                          "relative spread of initial values");
    score_cmd->add_option("--sigma-const", score_config_value.spread.sigma_const,
                          "relative spread of constants");
    score_cmd->add_option("--sigma-dur", score_sigma_dur_units,
                          "duration in units of the system default duration");
    score_cmd->add_option("--eval-samples", score_config_value.protocol.eval_samples);
    score_cmd->add_option("--eval-steps", score_config_value.protocol.eval_steps);
    score_cmd->add_option("--score-window", score_config_value.protocol.score_window);
    score_cmd->add_option("--seed", score_config_value.master_seed, "master seed");

    // ---- optimize ----
    CommonOptions opt_common;
    std::string opt_system;
    imts::gen::SpreadGrids opt_grids;
    imts::gen::EvalProtocol opt_protocol;
    std::uint64_t opt_seed = 0;
    auto* opt_cmd = app.add_subcommand("optimize", "grid-search spreads maximizing the score");
    add_common(opt_cmd, opt_common);
    opt_cmd->add_option("system", opt_system, "system name")->required();
    opt_cmd->add_option("--grid-initial", opt_grids.sigma_initial, "sigma_initial grid");
    opt_cmd->add_option("--grid-const", opt_grids.sigma_const, "sigma_const grid");
    opt_cmd->add_option("--grid-dur", opt_grids.sigma_dur,
                        "sigma_dur grid, units of the system default duration");
    opt_cmd->add_option("--eval-samples", opt_protocol.eval_samples);
    opt_cmd->add_option("--eval-steps", opt_protocol.eval_steps);
    opt_cmd->add_option("--score-window", opt_protocol.score_window);
    opt_cmd->add_option("--seed", opt_seed, "master seed");

    // ---- generate ----
    CommonOptions gen_common;
    std::string gen_system;
    std::string gen_out;
    bool gen_force = false;
    imts::gen::SpreadConfig gen_spread{0.1, 0.05, 1.0};
    double gen_sigma_dur_units = 1.0;
    imts::gen::DatasetConfig gen_config;
    imts::gen::EvalProtocol gen_protocol;
    std::optional<double> gen_noise_std, gen_noise_var;
    auto* gen_cmd = app.add_subcommand("generate", "materialize a dataset bundle");
    add_common(gen_cmd, gen_common);
    gen_cmd->add_option("system", gen_system, "system name")->required();
    gen_cmd->add_option("--out", gen_out, "bundle output directory")->required();
    gen_cmd->add_flag("--force", gen_force, "overwrite an existing bundle");
    gen_cmd->add_option("--sigma-initial", gen_spread.sigma_initial);
    gen_cmd->add_option("--sigma-const", gen_spread.sigma_const);
    gen_cmd->add_option("--sigma-dur", gen_sigma_dur_units,
                        "duration in units of the system default duration");
    gen_cmd->add_option("--instances", gen_config.instances);
    gen_cmd->add_option("--grid-steps", gen_config.grid_steps);
    gen_cmd->add_option("--window-steps", gen_config.window_steps);
    gen_cmd->add_option("--onset-range", gen_config.onset_range);
    gen_cmd->add_option("--dropout", gen_config.dropout)->check(CLI::Range(0.0, 0.999999));
    auto* gen_std_opt = gen_cmd->add_option("--noise-std", gen_noise_std,
                                            "observation noise standard deviation");
    gen_cmd->add_option("--noise-var", gen_noise_var, "observation noise variance")
        ->excludes(gen_std_opt);
    gen_cmd->add_option("--eval-samples", gen_protocol.eval_samples);
    gen_cmd->add_option("--eval-steps", gen_protocol.eval_steps);
    gen_cmd->add_option("--score-window", gen_protocol.score_window);
    gen_cmd->add_option("--seed", gen_config.master_seed, "master seed");

    // ---- evaluate ----
    CommonOptions eval_common;
    std::string eval_dir;
    std::vector<std::string> eval_baselines;
    int eval_folds = 5;
    std::optional<double> eval_fraction;
    std::uint64_t eval_seed = 0;
    bool eval_noisy_targets = false;
    std::string eval_csv_out;
    auto* eval_cmd = app.add_subcommand("evaluate", "run constant baselines on a bundle");
    add_common(eval_cmd, eval_common);
    eval_cmd->add_option("bundle", eval_dir, "bundle directory")->required();
    eval_cmd->add_option("--baseline", eval_baselines,
                         "baselines (history_mean, last_observation, global_train_mean)");
    eval_cmd->add_option("--folds", eval_folds)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--split-fraction", eval_fraction,
                         "observation fraction; defaults to the bundle's protocol value");
    eval_cmd->add_option("--seed", eval_seed, "split seed");
    eval_cmd->add_flag("--noisy-targets", eval_noisy_targets,
                       "score against noisy retained values instead of noiseless truth");
    eval_cmd->add_option("--csv-out", eval_csv_out, "write per-fold results as CSV");

    // ---- lorenz-bench ----
    CommonOptions lorenz_common;
    std::string lorenz_out;
    bool lorenz_force = false;
    imts::gen::LorenzProtocolConfig lorenz_config;
    auto* lorenz_cmd =
        app.add_subcommand("lorenz-bench", "fixed-constant chaotic benchmark (5/6 -> 1/6 split)");
    add_common(lorenz_cmd, lorenz_common);
    lorenz_cmd->add_option("--out", lorenz_out, "bundle output directory")->required();
    lorenz_cmd->add_flag("--force", lorenz_force, "overwrite an existing bundle");
    lorenz_cmd->add_option("--instances", lorenz_config.instances);
    lorenz_cmd->add_option("--sigma-dur", lorenz_config.duration, "absolute trajectory duration");
    lorenz_cmd->add_option("--dropout", lorenz_config.dropout)->check(CLI::Range(0.0, 0.999999));
    lorenz_cmd->add_option("--noise-std", lorenz_config.noise_std);
    lorenz_cmd->add_option("--seed", lorenz_config.master_seed, "master seed");

    // ---- verify ----
    CommonOptions verify_common;
    std::string verify_dir;
    auto* verify_cmd =
        app.add_subcommand("verify", "regenerate a bundle from its manifest and compare hashes");
    add_common(verify_cmd, verify_common);
    verify_cmd->add_option("bundle", verify_dir, "bundle directory")->required();

    // ---- report ----
    CommonOptions report_common;
    std::vector<std::string> report_dirs;
    int report_folds = 5;
    std::uint64_t report_seed = 0;
    std::string report_csv_out;
    auto* report_cmd = app.add_subcommand(
        "report", "difficulty-vs-error table over bundles, with rank correlation");
    add_common(report_cmd, report_common);
    report_cmd->add_option("bundles", report_dirs, "bundle directories")->required();
    report_cmd->add_option("--folds", report_folds)->check(CLI::PositiveNumber);
    report_cmd->add_option("--seed", report_seed, "split seed");
    report_cmd->add_option("--csv-out", report_csv_out, "write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUserError;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUserError;
    }

    std::cerr << "# kernels: " << imts::kernels::backend_name(imts::kernels::active_backend())
              << "\n";

    if (list_cmd->parsed()) {
        const auto registry = make_registry(list_common);
        std::cout << "name                 channels constants source\n";
        for (const auto& row : registry.list()) {
            std::string name = row.name;
            name.resize(21, ' ');
            std::cout << name << row.channels << "        " << row.constants << "         "
                      << (row.source == imts::systems::RegistryEntry::Source::builtin ? "builtin"
                                                                                      : "dsl_file")
                      << "\n";
        }
        return kExitOk;
    }

    if (score_cmd->parsed()) {
        const auto registry = make_registry(score_common);
        score_config_value.system = score_system;
        score_config_value.spread.sigma_dur =
            score_sigma_dur_units * registry.get(score_system).default_duration;
        const auto outcome =
            imts::gen::score_config(registry, score_config_value, score_common.jobs);
        if (!outcome.accepted()) {
            std::cout << "rejected " << imts::gen::reject_cause_name(*outcome.rejection) << "\n";
            return kExitAllRejected;
        }
        std::cout << "accepted\n";
        print_difficulty(*outcome.report);
        return kExitOk;
    }

    if (opt_cmd->parsed()) {
        const auto registry = make_registry(opt_common);
        const auto result = imts::gen::optimize_spreads(registry, opt_system, opt_grids,
                                                        opt_protocol, opt_seed, opt_common.jobs);
        std::cerr << "# grid points: " << result.log.verdicts.size() << " (rejected: solver "
                  << result.log.solver_failures << ", explosion " << result.log.explosions
                  << ", degenerate " << result.log.degenerate_channels << ")\n";
        if (result.all_rejected()) {
            std::cout << "all-rejected\n";
            return kExitAllRejected;
        }
        std::cout << "sigma_initial " << imts::format_double(result.best->sigma_initial) << "\n"
                  << "sigma_const " << imts::format_double(result.best->sigma_const) << "\n"
                  << "sigma_dur " << imts::format_double(result.best->sigma_dur) << "\n";
        print_difficulty(*result.report);
        return kExitOk;
    }

    if (gen_cmd->parsed()) {
        const auto registry = make_registry(gen_common);
        gen_spread.sigma_dur = gen_sigma_dur_units * registry.get(gen_system).default_duration;
        gen_config.noise_std = resolve_noise_std(gen_noise_std, gen_noise_var,
                                                 imts::gen::DatasetConfig{}.noise_std);
        const auto dataset = imts::gen::materialize_dataset(registry, gen_system, gen_spread,
                                                            gen_config, gen_protocol,
                                                            gen_common.jobs);
        const std::string hash = imts::io::write_bundle(dataset, gen_out, gen_force);
        std::cout << "bundle " << gen_out << "\n"
                  << "instances " << dataset.instances.size() << "\n"
                  << "regenerated " << dataset.meta.regenerated << "\n"
                  << "hash " << hash << "\n";
        return kExitOk;
    }

    if (eval_cmd->parsed()) {
        const auto dataset = imts::io::read_bundle(eval_dir);
        const auto modes = parse_baselines(eval_baselines);
        const auto report = run_evaluation(dataset, modes, eval_folds, eval_fraction, eval_seed,
                                           eval_noisy_targets);
        print_evaluation(report);
        if (!eval_csv_out.empty()) {
            write_text(eval_csv_out, evaluation_csv(dataset.meta.system_name, report));
        }
        return kExitOk;
    }

    if (lorenz_cmd->parsed()) {
        const auto registry = make_registry(lorenz_common);
        const auto dataset =
            imts::gen::lorenz_protocol(registry, lorenz_config, lorenz_common.jobs);
        const std::string hash = imts::io::write_bundle(dataset, lorenz_out, lorenz_force);
        std::cout << "bundle " << lorenz_out << "\n"
                  << "instances " << dataset.instances.size() << "\n"
                  << "split_fraction " << imts::format_double(dataset.meta.split_fraction) << "\n"
                  << "hash " << hash << "\n";
        return kExitOk;
    }

    if (verify_cmd->parsed()) {
        const auto result = imts::io::verify_bundle(verify_dir, verify_common.jobs);
        std::cout << "recorded " << result.recorded_hash << "\n"
                  << "regenerated " << result.regenerated_hash << "\n"
                  << (result.reproduced ? "verified\n" : "MISMATCH\n");
        return result.reproduced ? kExitOk : kExitInternalError;
    }

    if (report_cmd->parsed()) {
        std::vector<double> jgds, mses;
        std::string csv = "dataset,jgd,best_baseline,best_mse\n";
        std::cout << "dataset              jgd          best_baseline      best_mse\n";
        for (const auto& dir : report_dirs) {
            const auto dataset = imts::io::read_bundle(dir);
            if (!dataset.meta.difficulty) {
                throw imts::io::IoError("bundle " + dir + " carries no difficulty report");
            }
            const double jgd = dataset.meta.difficulty->aggregated_jgd;
            const auto modes = parse_baselines({});
            const auto report = run_evaluation(dataset, modes, report_folds, std::nullopt,
                                               report_seed, false);
            double best = report.baselines.front().mean_mse;
            auto best_mode = report.baselines.front().mode;
            for (const auto& baseline : report.baselines) {
                if (baseline.mean_mse < best) {
                    best = baseline.mean_mse;
                    best_mode = baseline.mode;
                }
            }
            jgds.push_back(jgd);
            mses.push_back(best);
            std::string name = dataset.meta.system_name;
            name.resize(21, ' ');
            std::string mode_name(imts::eval::baseline_name(best_mode));
            mode_name.resize(19, ' ');
            std::cout << name << imts::format_double(jgd) << "  " << mode_name
                      << imts::format_double(best) << "\n";
            csv += dataset.meta.system_name + "," + imts::format_double(jgd) + "," +
                   std::string(imts::eval::baseline_name(best_mode)) + "," +
                   imts::format_double(best) + "\n";
        }
        if (jgds.size() >= 3) {
            std::cout << "spearman " << imts::format_double(imts::eval::spearman(jgds, mses))
                      << "\n";
        }
        if (!report_csv_out.empty()) write_text(report_csv_out, csv);
        return kExitOk;
    }

    return kExitUserError;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const imts::gen::SpreadRejectedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAllRejected;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const imts::dsl::ParseError& e) {
        std::cerr << "error: line " << e.where().line << ", column " << e.where().column << ": "
                  << e.what() << "\n";
        return kExitUserError;
    } catch (const imts::systems::RegistryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const imts::io::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternalError;
    }
}
