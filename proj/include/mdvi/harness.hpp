#pragma once

// Experiment orchestration: seeded runs, first-crossing sample counts,
// convergence aggregation and flat-file persistence.

#include "mdvi/garnet.hpp"
#include "mdvi/mdp_json.hpp"
#include "mdvi/mirror_descent.hpp"
#include "mdvi/qlearning.hpp"
#include "mdvi/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace mdvi {

inline constexpr int kSweepSchemaVersion = 1;

struct MdpSource {
    enum class Kind { Garnet, File };
    Kind kind = Kind::Garnet;
    GarnetParams garnet;
    /// Draw a fresh Garnet per run seed (garnet seed = derive_seed(garnet.seed, run seed)).
    bool garnet_per_seed = true;
    std::string path;

    bool operator==(const MdpSource&) const = default;
};

struct AlgorithmSpec {
    enum class Kind { Mdvi, QLearning };
    Kind kind = Kind::Mdvi;
    /// Seed fields of the configs are ignored; each run derives its own.
    MdviConfig mdvi;
    QLearningConfig qlearning;

    bool operator==(const AlgorithmSpec&) const = default;

    int iterations() const { return kind == Kind::Mdvi ? mdvi.iterations : qlearning.iterations; }
    int samples_per_update() const {
        return kind == Kind::Mdvi ? mdvi.samples_per_update : qlearning.samples_per_update;
    }
    const char* name() const { return kind == Kind::Mdvi ? "mdvi" : "qlearning"; }
};

struct ExperimentSpec {
    MdpSource mdp;
    AlgorithmSpec algorithm;
    /// Sorted descending and deduplicated by normalize().
    std::vector<double> errors{1.0, 0.1, 0.01};
    std::vector<std::uint64_t> seeds{0};
    /// Runs stop before an iteration that would exceed this many samples.
    std::optional<std::uint64_t> max_samples;
    int record_every = 1;
    /// Also record ‖v* − v^{π'_k}‖ (greedy MDVI only).
    bool nonstationary = false;
    int threads = 1;
    /// Fill wall_ms; off by default so outputs are byte-reproducible.
    bool timing = false;
    /// End a run once every error level has been crossed.
    bool stop_at_crossing = false;

    bool operator==(const ExperimentSpec&) const = default;

    void normalize() {
        std::sort(errors.begin(), errors.end(), std::greater<>());
        errors.erase(std::unique(errors.begin(), errors.end()), errors.end());
    }

    void validate() const {
        if (errors.empty()) throw validation_error("experiment.errors must be nonempty");
        for (double e : errors)
            if (!(e > 0.0) || !std::isfinite(e)) throw validation_error("experiment.errors must be positive");
        if (!std::is_sorted(errors.begin(), errors.end(), std::greater<>()))
            throw validation_error("experiment.errors must be in descending order");
        if (seeds.empty()) throw validation_error("experiment.seeds must be nonempty");
        if (record_every < 1) throw validation_error("experiment.record_every must be >= 1");
        if (threads < 1) throw validation_error("experiment.threads must be >= 1");
        if (mdp.kind == MdpSource::Kind::Garnet) mdp.garnet.validate();
        else if (mdp.path.empty()) throw validation_error("mdp.path must be set for file sources");
        if (algorithm.kind == AlgorithmSpec::Kind::Mdvi) {
            algorithm.mdvi.validate();
            if (nonstationary && !std::isinf(algorithm.mdvi.beta))
                throw validation_error("experiment.nonstationary needs algorithm.beta = inf");
        } else {
            algorithm.qlearning.validate();
            if (nonstationary) throw validation_error("experiment.nonstationary applies to mdvi only");
        }
    }
};

struct RunRecord {
    std::uint64_t seed = 0;
    int k = 0;
    std::uint64_t samples = 0;
    double sup_error_last = 0.0;
    std::optional<double> sup_error_ns;
    double wall_ms = 0.0;
};

struct Crossing {
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    bool censored = true;
    std::uint64_t samples = 0;
    int iteration = 0;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<RunRecord> records;
    std::vector<Crossing> crossings;
};

struct QuantileSummary {
    double epsilon = 0.0;
    std::size_t runs = 0;
    std::size_t censored = 0;
    /// Censored runs count as +∞; a statistic landing on them is absent.
    std::optional<double> median, q25, q75;
};

struct SweepResult {
    std::string algorithm;
    std::vector<double> errors;
    std::vector<SeedResult> per_seed;
    std::vector<QuantileSummary> summary;
};

/// Seed of the MDP used by a run.
inline std::uint64_t garnet_seed_for(const MdpSource& src, std::uint64_t run_seed) {
    return src.garnet_per_seed ? derive_seed(src.garnet.seed, run_seed) : src.garnet.seed;
}

/// Seed of the algorithm's sampling stream for a run.
inline std::uint64_t algorithm_seed_for(std::uint64_t run_seed) { return derive_seed(run_seed, 1); }

inline TabularMdp build_mdp(const MdpSource& src, std::uint64_t run_seed) {
    if (src.kind == MdpSource::Kind::File) return load_mdp(src.path);
    GarnetParams p = src.garnet;
    p.seed = garnet_seed_for(src, run_seed);
    return generate_garnet(p);
}

/// Linear-interpolation quantile of an ascending sample that may contain +∞.
inline std::optional<double> quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return std::nullopt;
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    if (std::isinf(sorted[hi])) return std::nullopt;
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::vector<QuantileSummary> summarize_crossings(const std::vector<double>& errors,
                                                        const std::vector<SeedResult>& per_seed) {
    std::vector<QuantileSummary> out;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        QuantileSummary s;
        s.epsilon = errors[i];
        std::vector<double> values;
        for (const auto& r : per_seed) {
            const Crossing& c = r.crossings.at(i);
            if (c.censored) ++s.censored;
            values.push_back(c.censored ? std::numeric_limits<double>::infinity()
                                        : static_cast<double>(c.samples));
        }
        std::sort(values.begin(), values.end());
        s.runs = values.size();
        s.median = quantile(values, 0.5);
        s.q25 = quantile(values, 0.25);
        s.q75 = quantile(values, 0.75);
        out.push_back(s);
    }
    return out;
}

namespace detail {

/// ‖v* − v^π‖_∞ with a per-run cache for deterministic policies.
class PolicyErrorCache {
public:
    PolicyErrorCache(const TabularMdp& mdp, VTable v_star) : mdp_(mdp), v_star_(std::move(v_star)) {}

    double operator()(const DetPolicy& pi) {
        auto it = cache_.find(pi.action);
        if (it != cache_.end()) return it->second;
        const double e = sup_norm(VTable(v_star_ - policy_evaluation(mdp_, pi)));
        cache_.emplace(pi.action, e);
        return e;
    }

    double operator()(const Policy& pi) {
        if (const auto* det = std::get_if<DetPolicy>(&pi)) return (*this)(*det);
        return sup_norm(VTable(v_star_ - policy_evaluation(mdp_, pi)));
    }

    const VTable& v_star() const { return v_star_; }

private:
    const TabularMdp& mdp_;
    VTable v_star_;
    std::map<std::vector<int>, double> cache_;
};

} // namespace detail

/// One seeded run: records every record_every iterations (plus the last) and
/// the first-crossing sample count of every error level, checked at every
/// iteration.
inline SeedResult run_seed(const ExperimentSpec& spec, std::uint64_t seed) {
    const TabularMdp mdp = build_mdp(spec.mdp, seed);
    const OptimalSolution opt = exact_optimal(mdp, 1e-10);
    detail::PolicyErrorCache error_of(mdp, policy_evaluation(mdp, opt.pi_star));

    SeedResult out;
    out.seed = seed;
    for (double e : spec.errors) out.crossings.push_back(Crossing{e, seed, true, 0, 0});
    std::size_t next_crossing = 0;

    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t per_iteration =
        static_cast<std::uint64_t>(spec.algorithm.samples_per_update()) * mdp.num_pairs();
    const int K = spec.algorithm.iterations();

    // Non-stationary values by u_1 = q^{π_0}, u_{k+1} = T^{π_k} u_k, v^{π'_k} = π_k u_k.
    QTable ns_u;
    std::optional<DetPolicy> ns_prev;

    const auto observe = [&](int k, std::uint64_t samples, const Policy& pi) {
        const double err = error_of(pi);
        while (next_crossing < out.crossings.size() && err <= out.crossings[next_crossing].epsilon) {
            Crossing& c = out.crossings[next_crossing++];
            c.censored = false;
            c.samples = samples;
            c.iteration = k;
        }
        std::optional<double> ns;
        if (spec.nonstationary) {
            const DetPolicy& det = std::get<DetPolicy>(pi);
            if (k == 0) {
                ns = err;
            } else {
                ns_u = (k == 1) ? policy_q(mdp, *ns_prev) : bellman_backup(mdp, *ns_prev, ns_u);
                ns = sup_norm(VTable(error_of.v_star() - aggregate(det, ns_u)));
            }
            ns_prev = det;
        }
        const bool last = k == K;
        const bool budget_left = !spec.max_samples || samples + per_iteration <= *spec.max_samples;
        const bool all_crossed = next_crossing == out.crossings.size();
        const bool stop = !budget_left || (spec.stop_at_crossing && all_crossed);
        if (k % spec.record_every == 0 || last || stop) {
            RunRecord rec{seed, k, samples, err, ns, 0.0};
            if (spec.timing)
                rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                                  .count();
            out.records.push_back(rec);
        }
        return !stop;
    };

    if (spec.algorithm.kind == AlgorithmSpec::Kind::Mdvi) {
        MdviConfig cfg = spec.algorithm.mdvi;
        cfg.seed = algorithm_seed_for(seed);
        mdvi_stream(mdp, cfg, [&](const MdviState& st, const Policy& pi) {
            return observe(st.iteration, st.samples_used, pi);
        });
    } else {
        QLearningConfig cfg = spec.algorithm.qlearning;
        cfg.seed = algorithm_seed_for(seed);
        q_learning_stream(mdp, cfg, [&](const QLearningStep& st) {
            return observe(st.k, st.samples_used, Policy{st.policy});
        });
    }
    return out;
}

/// Runs every seed (across up to spec.threads workers) and reduces in seed
/// order, so the result does not depend on completion order.
inline SweepResult sample_complexity_sweep(ExperimentSpec spec) {
    spec.normalize();
    spec.validate();
    SweepResult result;
    result.algorithm = spec.algorithm.name();
    result.errors = spec.errors;
    result.per_seed.resize(spec.seeds.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < spec.seeds.size(); i = next++) {
            try {
                result.per_seed[i] = run_seed(spec, spec.seeds[i]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(spec.threads), spec.seeds.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::stable_sort(result.per_seed.begin(), result.per_seed.end(),
                     [](const SeedResult& a, const SeedResult& b) { return a.seed < b.seed; });
    result.summary = summarize_crossings(result.errors, result.per_seed);
    return result;
}

struct ConvergenceRow {
    int k = 0;
    std::uint64_t samples = 0;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t runs = 0;
};

/// Mean and (n−1) standard deviation of sup_error_last across seeds at each
/// recorded point. All runs must share the same (k, samples) axis.
inline std::vector<ConvergenceRow> aggregate_convergence(const std::vector<std::vector<RunRecord>>& runs) {
    if (runs.size() < 2) throw validation_error("convergence: need at least two runs");
    const auto& axis = runs.front();
    for (const auto& r : runs) {
        if (r.size() != axis.size())
            throw validation_error("convergence: runs have different numbers of records");
        for (std::size_t i = 0; i < r.size(); ++i)
            if (r[i].k != axis[i].k || r[i].samples != axis[i].samples)
                throw validation_error("convergence: runs disagree on the (k, samples) axis");
    }
    std::vector<ConvergenceRow> out;
    const double n = static_cast<double>(runs.size());
    for (std::size_t i = 0; i < axis.size(); ++i) {
        double sum = 0.0;
        for (const auto& r : runs) sum += r[i].sup_error_last;
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : runs) ss += (r[i].sup_error_last - mean) * (r[i].sup_error_last - mean);
        out.push_back(ConvergenceRow{axis[i].k, axis[i].samples, mean, std::sqrt(ss / (n - 1.0)), runs.size()});
    }
    return out;
}

inline std::vector<ConvergenceRow> convergence_suite(const ExperimentSpec& spec) {
    if (spec.seeds.size() < 2) throw validation_error("convergence: need at least two seeds");
    if (spec.stop_at_crossing) throw validation_error("convergence: stop_at_crossing truncates runs");
    const SweepResult sweep = sample_complexity_sweep(spec);
    std::vector<std::vector<RunRecord>> runs;
    for (const auto& r : sweep.per_seed) runs.push_back(r.records);
    return aggregate_convergence(runs);
}

// ---- serialization ---------------------------------------------------------

/// Shortest round-trip decimal form.
inline std::string format_double(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string records_csv_header(bool nonstationary) {
    return nonstationary ? "seed,k,samples,sup_error_last,sup_error_ns,wall_ms"
                         : "seed,k,samples,sup_error_last,wall_ms";
}

inline void write_records_csv(std::ostream& os, const std::vector<SeedResult>& per_seed, bool nonstationary) {
    os << records_csv_header(nonstationary) << '\n';
    for (const auto& r : per_seed) {
        for (const auto& rec : r.records) {
            os << rec.seed << ',' << rec.k << ',' << rec.samples << ',' << format_double(rec.sup_error_last);
            if (nonstationary) os << ',' << format_double(rec.sup_error_ns.value_or(std::nan("")));
            os << ',' << format_double(rec.wall_ms) << '\n';
        }
    }
}

inline void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
    os << "k,samples,mean,std,runs\n";
    for (const auto& r : rows)
        os << r.k << ',' << r.samples << ',' << format_double(r.mean) << ',' << format_double(r.stddev) << ','
           << r.runs << '\n';
}

inline nlohmann::json sweep_to_json(const SweepResult& s) {
    using nlohmann::json;
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json crossings = json::array();
    for (const auto& r : s.per_seed) {
        for (const auto& c : r.crossings) {
            crossings.push_back({{"epsilon", c.epsilon},
                                 {"seed", c.seed},
                                 {"censored", c.censored},
                                 {"samples", c.censored ? json(nullptr) : json(c.samples)},
                                 {"iteration", c.censored ? json(nullptr) : json(c.iteration)}});
        }
    }
    json summary = json::array();
    for (const auto& q : s.summary) {
        summary.push_back({{"epsilon", q.epsilon},
                           {"runs", q.runs},
                           {"censored", q.censored},
                           {"median", opt(q.median)},
                           {"q25", opt(q.q25)},
                           {"q75", opt(q.q75)}});
    }
    return json{{"schema_version", kSweepSchemaVersion},
                {"algorithm", s.algorithm},
                {"errors", s.errors},
                {"crossings", crossings},
                {"summary", summary}};
}

/// Files written by run_experiment.
struct ExperimentOutputs {
    std::filesystem::path records_csv;
    std::filesystem::path sweep_json;
    std::optional<std::filesystem::path> convergence_csv;
    std::filesystem::path resolved_config;
};

} // namespace mdvi
