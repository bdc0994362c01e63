#include "gradsurg/runner.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gradsurg/rng.hpp"

namespace gradsurg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

struct RunArtifacts {
    std::uint64_t seed = 0;
    std::string csv_name;
    TrainResult result;
};

std::string csv_for_seed(std::uint64_t seed) {
    return "run_" + std::to_string(seed) + ".csv";
}

void write_csv(const fs::path& path, const TrainResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "epoch,task_id,mean_loss,conflict_fraction,mean_cosine,prob_assigned,"
           "wallclock_s\n";
    for (const MetricsRecord& rec : result.records) {
        for (std::size_t t = 0; t < rec.per_task_mean_loss.size(); ++t) {
            out << rec.epoch << ',' << t << ',' << format_double(rec.per_task_mean_loss[t])
                << ',' << format_double(rec.conflict_fraction) << ','
                << format_double(rec.mean_pairwise_cosine) << ','
                << format_double(rec.distribution_used[t]) << ",0\n";
        }
    }
}

json run_to_json(const RunArtifacts& run) {
    json j;
    j["seed"] = run.seed;
    j["csv"] = run.csv_name;
    j["diverged"] = run.result.diverged();
    if (run.result.diverged()) {
        const DivergenceInfo& d = *run.result.divergence;
        j["divergence"] = {{"epoch", d.epoch},
                           {"iteration", d.iteration},
                           {"task", d.task},
                           {"loss", d.loss},
                           {"reason", d.reason}};
    }
    j["final_per_task_loss"] = run.result.final_per_task_loss();
    double total = 0.0;
    for (double l : run.result.final_per_task_loss()) {
        total += l;
    }
    j["final_summed_loss"] = total;
    json history = json::array();
    for (const MetricsRecord& rec : run.result.records) {
        history.push_back(rec.distribution_used);
    }
    j["distribution_history"] = std::move(history);
    return j;
}

struct Aggregate {
    std::vector<double> mean;
    std::vector<double> stddev;
};

Aggregate aggregate_columns(const std::vector<std::vector<double>>& rows) {
    Aggregate agg;
    if (rows.empty()) {
        return agg;
    }
    const std::size_t cols = rows.front().size();
    const double n = static_cast<double>(rows.size());
    agg.mean.assign(cols, 0.0);
    agg.stddev.assign(cols, 0.0);
    for (const std::vector<double>& row : rows) {
        for (std::size_t c = 0; c < cols; ++c) {
            agg.mean[c] += row[c];
        }
    }
    for (std::size_t c = 0; c < cols; ++c) {
        agg.mean[c] /= n;
    }
    if (rows.size() > 1) {
        for (const std::vector<double>& row : rows) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double d = row[c] - agg.mean[c];
                agg.stddev[c] += d * d;
            }
        }
        for (std::size_t c = 0; c < cols; ++c) {
            agg.stddev[c] = std::sqrt(agg.stddev[c] / (n - 1.0));
        }
    }
    return agg;
}

} // namespace

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
    const fs::path out_dir(config.output_path);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        log << "error: cannot create output directory " << out_dir.string() << ": "
            << ec.message() << "\n";
        return 2;
    }
    // Probe writability before any training starts.
    const fs::path summary_path = out_dir / "summary.json";
    {
        std::ofstream probe(summary_path, std::ios::binary);
        if (!probe) {
            log << "error: output path " << summary_path.string()
                << " is not writable\n";
            return 2;
        }
    }

    std::vector<RunArtifacts> runs;
    runs.reserve(config.repeats);
    bool any_diverged = false;

    for (std::size_t r = 0; r < config.repeats; ++r) {
        const std::uint64_t run_seed = config.seed + r;
        auto problem = make_problem(config.problem);
        auto policy = make_policy(config);

        TrainOptions options;
        options.epochs = config.epochs;
        options.lr = config.lr;
        options.seed = run_seed;
        options.scope = config.scope;

        RunArtifacts run;
        run.seed = run_seed;
        run.csv_name = csv_for_seed(run_seed);
        run.result = train(*problem, *policy, config.method, options);
        write_csv(out_dir / run.csv_name, run.result);

        double wallclock = 0.0;
        for (const MetricsRecord& rec : run.result.records) {
            wallclock += rec.wallclock_seconds;
        }
        log << "run seed=" << run_seed << " epochs=" << run.result.records.size()
            << " wallclock=" << wallclock << "s";
        if (run.result.diverged()) {
            any_diverged = true;
            const DivergenceInfo& d = *run.result.divergence;
            log << " DIVERGED at epoch " << d.epoch << " iteration " << d.iteration
                << " task " << d.task << " (" << d.reason << ")";
        }
        log << "\n";
        runs.push_back(std::move(run));
    }

    json summary;
    summary["schema_version"] = 1;
    summary["rng_algorithm"] = std::string(kRngAlgorithmId);
    summary["config"] = json::parse(render_config(config));
    summary["runs"] = json::array();
    std::vector<std::vector<double>> finals;
    std::vector<std::vector<double>> summed;
    for (const RunArtifacts& run : runs) {
        summary["runs"].push_back(run_to_json(run));
        if (!run.result.diverged()) {
            finals.push_back(run.result.final_per_task_loss());
            double total = 0.0;
            for (double l : run.result.final_per_task_loss()) {
                total += l;
            }
            summed.push_back({total});
        }
    }
    const Aggregate per_task = aggregate_columns(finals);
    const Aggregate total = aggregate_columns(summed);
    summary["aggregate"] = {
        {"completed_runs", finals.size()},
        {"mean_final_per_task_loss", per_task.mean},
        {"stddev_final_per_task_loss", per_task.stddev},
        {"mean_final_summed_loss", total.mean.empty() ? 0.0 : total.mean.front()},
        {"stddev_final_summed_loss",
         total.stddev.empty() ? 0.0 : total.stddev.front()},
    };

    std::ofstream out(summary_path, std::ios::binary);
    if (!out) {
        log << "error: cannot write " << summary_path.string() << "\n";
        return 2;
    }
    out << summary.dump(2) << "\n";

    return any_diverged ? 1 : 0;
}

int compare_summaries(const std::vector<std::string>& summary_paths,
                      std::ostream& out, std::ostream& err) {
    if (summary_paths.size() < 2) {
        err << "compare: need at least two summary files\n";
        return 2;
    }
    struct Loaded {
        std::string path;
        std::string label;
        json problem;
        std::vector<double> mean;
        std::vector<double> stddev;
        double summed_mean = 0.0;
    };
    std::vector<Loaded> loaded;
    for (const std::string& path : summary_paths) {
        std::ifstream in(path);
        if (!in) {
            err << "compare: cannot read " << path << "\n";
            return 2;
        }
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.contains("config") || !j.contains("aggregate")) {
            err << "compare: " << path << " is not a run summary\n";
            return 2;
        }
        Loaded l;
        l.path = path;
        l.label = j["config"].value("method", "?");
        if (j["config"].contains("policy")) {
            l.label += "+" + j["config"]["policy"].value("kind", "?");
        }
        l.problem = j["config"]["problem"];
        l.mean = j["aggregate"]["mean_final_per_task_loss"].get<std::vector<double>>();
        l.stddev =
            j["aggregate"]["stddev_final_per_task_loss"].get<std::vector<double>>();
        l.summed_mean = j["aggregate"]["mean_final_summed_loss"].get<double>();
        loaded.push_back(std::move(l));
    }
    for (std::size_t i = 1; i < loaded.size(); ++i) {
        if (loaded[i].problem != loaded.front().problem) {
            err << "compare: " << loaded[i].path
                << " describes a different problem than " << loaded.front().path
                << "\n";
            return 2;
        }
    }

    auto pct = [](double base, double value) {
        const double delta = (value - base) / base * 100.0;
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(1);
        s << (delta >= 0 ? "+" : "") << delta << "%";
        return s.str();
    };

    const Loaded& base = loaded.front();
    out << "baseline: " << base.path << " (" << base.label << ")\n";
    for (const Loaded& l : loaded) {
        out << "\n" << l.path << " (" << l.label << ")\n";
        for (std::size_t t = 0; t < l.mean.size(); ++t) {
            out << "  task " << t << ": mean_final_loss=" << format_double(l.mean[t])
                << " stddev=" << format_double(l.stddev[t]);
            if (&l != &base && t < base.mean.size() && base.mean[t] != 0.0) {
                out << " delta=" << pct(base.mean[t], l.mean[t]);
            }
            out << "\n";
        }
        out << "  summed: mean_final_loss=" << format_double(l.summed_mean);
        if (&l != &base && base.summed_mean != 0.0) {
            out << " delta=" << pct(base.summed_mean, l.summed_mean);
        }
        out << "\n";
    }
    return 0;
}

} // namespace gradsurg
