#pragma once

// TOML experiment specs and the run_experiment driver.
//
//   [mdp]
//   kind = "garnet"            # or "file" with path = "mdp.json"
//   states = 8
//   actions = 2
//   branching = 2
//   discount = 0.9
//   seed = 0
//   per_seed = true
//
//   [algorithm]
//   name = "mdvi"              # or "qlearning"
//   alpha = 1.0
//   beta = inf                 # float or "inf"
//   iterations = 1000
//   samples = 1
//   exact = false
//   rate_exponent = 1.0        # qlearning only
//
//   [experiment]
//   errors = [1.0, 0.1, 0.01]
//   seeds = 100                # count (0..n-1) or explicit list
//   max_samples = 1000000
//   record_every = 1
//   nonstationary = false
//   threads = 1
//   timing = false
//   stop_at_crossing = false

#include "mdvi/harness.hpp"

#include <toml.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace mdvi {

namespace detail {

inline std::string where(const toml::node& n) {
    const auto& src = n.source();
    std::ostringstream os;
    if (src.begin.line) os << " (line " << src.begin.line << ")";
    return os.str();
}

inline void reject_unknown_keys(const toml::table& t, const std::string& section,
                                const std::set<std::string>& allowed) {
    for (const auto& [key, node] : t) {
        if (!allowed.count(std::string(key.str())))
            throw validation_error("unknown key '" + section + "." + std::string(key.str()) + "'" + where(node));
    }
}

inline const toml::table* subtable(const toml::table& root, const std::string& name, bool required) {
    const toml::node* n = root.get(name);
    if (!n) {
        if (required) throw validation_error("missing section [" + name + "]");
        return nullptr;
    }
    if (!n->is_table()) throw validation_error("'" + name + "' must be a table" + where(*n));
    return n->as_table();
}

inline std::optional<std::int64_t> get_int(const toml::table& t, const std::string& section, const char* key) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_integer())
        throw validation_error("'" + section + "." + key + "' must be an integer" + where(*n));
    return n->as_integer()->get();
}

inline std::optional<std::uint64_t> get_count(const toml::table& t, const std::string& section, const char* key) {
    const auto v = get_int(t, section, key);
    if (v && *v < 0)
        throw validation_error("'" + section + "." + key + "' must be non-negative" + where(*t.get(key)));
    if (!v) return std::nullopt;
    return static_cast<std::uint64_t>(*v);
}

inline std::optional<double> get_real(const toml::table& t, const std::string& section, const char* key) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (n->is_floating_point()) return n->as_floating_point()->get();
    if (n->is_integer()) return static_cast<double>(n->as_integer()->get());
    if (n->is_string() && n->as_string()->get() == "inf") return std::numeric_limits<double>::infinity();
    throw validation_error("'" + section + "." + key + "' must be a number" + where(*n));
}

inline std::optional<bool> get_bool(const toml::table& t, const std::string& section, const char* key) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_boolean()) throw validation_error("'" + section + "." + key + "' must be a boolean" + where(*n));
    return n->as_boolean()->get();
}

inline std::optional<std::string> get_string(const toml::table& t, const std::string& section, const char* key) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) throw validation_error("'" + section + "." + key + "' must be a string" + where(*n));
    return n->as_string()->get();
}

inline int to_int(std::uint64_t v, const char* what) {
    if (v > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
        throw validation_error(std::string(what) + " is too large");
    return static_cast<int>(v);
}

} // namespace detail

/// Parses a spec. Relative MDP paths resolve against base_dir. Defaults are
/// materialized, errors are sorted descending, and the result is validated.
inline ExperimentSpec parse_experiment_spec(const toml::table& root, const std::filesystem::path& base_dir = {}) {
    using namespace detail;
    reject_unknown_keys(root, "", {"mdp", "algorithm", "experiment"});
    ExperimentSpec spec;

    const toml::table& mdp = *subtable(root, "mdp", true);
    reject_unknown_keys(mdp, "mdp", {"kind", "states", "actions", "branching", "discount", "seed", "per_seed", "path"});
    const std::string kind = get_string(mdp, "mdp", "kind").value_or("garnet");
    if (kind == "garnet") {
        spec.mdp.kind = MdpSource::Kind::Garnet;
        auto& g = spec.mdp.garnet;
        g.num_states = get_count(mdp, "mdp", "states").value_or(g.num_states);
        g.num_actions = get_count(mdp, "mdp", "actions").value_or(g.num_actions);
        g.branching = get_count(mdp, "mdp", "branching").value_or(g.branching);
        g.discount = get_real(mdp, "mdp", "discount").value_or(g.discount);
        g.seed = get_count(mdp, "mdp", "seed").value_or(g.seed);
        spec.mdp.garnet_per_seed = get_bool(mdp, "mdp", "per_seed").value_or(true);
        if (mdp.get("path")) throw validation_error("'mdp.path' is only valid with kind = \"file\"");
    } else if (kind == "file") {
        spec.mdp.kind = MdpSource::Kind::File;
        const auto path = get_string(mdp, "mdp", "path");
        if (!path) throw validation_error("'mdp.path' is required with kind = \"file\"");
        std::filesystem::path p(*path);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        spec.mdp.path = p.lexically_normal().string();
        for (const char* key : {"states", "actions", "branching", "discount", "seed", "per_seed"})
            if (mdp.get(key)) throw validation_error(std::string("'mdp.") + key + "' is only valid for garnet sources");
    } else {
        throw validation_error("'mdp.kind' must be \"garnet\" or \"file\"" + where(*mdp.get("kind")));
    }

    const toml::table& alg = *subtable(root, "algorithm", true);
    const std::string name = get_string(alg, "algorithm", "name").value_or("mdvi");
    if (name == "mdvi") {
        reject_unknown_keys(alg, "algorithm", {"name", "alpha", "beta", "iterations", "samples", "exact"});
        spec.algorithm.kind = AlgorithmSpec::Kind::Mdvi;
        auto& c = spec.algorithm.mdvi;
        c.alpha = get_real(alg, "algorithm", "alpha").value_or(c.alpha);
        c.beta = get_real(alg, "algorithm", "beta").value_or(c.beta);
        if (auto v = get_count(alg, "algorithm", "iterations")) c.iterations = to_int(*v, "algorithm.iterations");
        if (auto v = get_count(alg, "algorithm", "samples")) c.samples_per_update = to_int(*v, "algorithm.samples");
        c.exact_mode = get_bool(alg, "algorithm", "exact").value_or(false);
    } else if (name == "qlearning") {
        reject_unknown_keys(alg, "algorithm", {"name", "iterations", "samples", "rate_exponent"});
        spec.algorithm.kind = AlgorithmSpec::Kind::QLearning;
        auto& c = spec.algorithm.qlearning;
        if (auto v = get_count(alg, "algorithm", "iterations")) c.iterations = to_int(*v, "algorithm.iterations");
        if (auto v = get_count(alg, "algorithm", "samples")) c.samples_per_update = to_int(*v, "algorithm.samples");
        c.rate_exponent = get_real(alg, "algorithm", "rate_exponent").value_or(c.rate_exponent);
    } else {
        throw validation_error("'algorithm.name' must be \"mdvi\" or \"qlearning\"" + where(*alg.get("name")));
    }

    if (const toml::table* exp = subtable(root, "experiment", false)) {
        reject_unknown_keys(*exp, "experiment",
                            {"errors", "seeds", "max_samples", "record_every", "nonstationary", "threads", "timing",
                             "stop_at_crossing"});
        if (const toml::node* n = exp->get("errors")) {
            if (!n->is_array()) throw validation_error("'experiment.errors' must be an array" + where(*n));
            spec.errors.clear();
            for (const auto& e : *n->as_array()) {
                if (e.is_floating_point()) spec.errors.push_back(e.as_floating_point()->get());
                else if (e.is_integer()) spec.errors.push_back(static_cast<double>(e.as_integer()->get()));
                else throw validation_error("'experiment.errors' entries must be numbers" + where(e));
            }
        }
        if (const toml::node* n = exp->get("seeds")) {
            spec.seeds.clear();
            if (n->is_integer()) {
                const auto count = n->as_integer()->get();
                if (count < 1) throw validation_error("'experiment.seeds' count must be >= 1" + where(*n));
                for (std::int64_t i = 0; i < count; ++i) spec.seeds.push_back(static_cast<std::uint64_t>(i));
            } else if (n->is_array()) {
                for (const auto& e : *n->as_array()) {
                    if (!e.is_integer() || e.as_integer()->get() < 0)
                        throw validation_error("'experiment.seeds' entries must be non-negative integers" + where(e));
                    spec.seeds.push_back(static_cast<std::uint64_t>(e.as_integer()->get()));
                }
                std::set<std::uint64_t> unique(spec.seeds.begin(), spec.seeds.end());
                if (unique.size() != spec.seeds.size())
                    throw validation_error("'experiment.seeds' contains duplicates" + where(*n));
            } else {
                throw validation_error("'experiment.seeds' must be a count or a list" + where(*n));
            }
        }
        spec.max_samples = get_count(*exp, "experiment", "max_samples");
        if (auto v = get_count(*exp, "experiment", "record_every")) spec.record_every = to_int(*v, "record_every");
        spec.nonstationary = get_bool(*exp, "experiment", "nonstationary").value_or(false);
        if (auto v = get_count(*exp, "experiment", "threads")) spec.threads = to_int(*v, "threads");
        spec.timing = get_bool(*exp, "experiment", "timing").value_or(false);
        spec.stop_at_crossing = get_bool(*exp, "experiment", "stop_at_crossing").value_or(false);
    }

    spec.normalize();
    spec.validate();
    return spec;
}

inline ExperimentSpec parse_experiment_spec_string(std::string_view text,
                                                   const std::filesystem::path& base_dir = {}) {
    try {
        return parse_experiment_spec(toml::parse(text), base_dir);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config parse error at line " << e.source().begin.line << ", column " << e.source().begin.column
           << ": " << e.description();
        throw validation_error(os.str());
    }
}

inline ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot read config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment_spec_string(buf.str(), path.parent_path());
}

/// Resolved spec with every default written out; parses back to an equal spec.
inline toml::table spec_to_toml(const ExperimentSpec& spec) {
    toml::table mdp;
    if (spec.mdp.kind == MdpSource::Kind::Garnet) {
        const auto& g = spec.mdp.garnet;
        mdp.insert("kind", "garnet");
        mdp.insert("states", static_cast<std::int64_t>(g.num_states));
        mdp.insert("actions", static_cast<std::int64_t>(g.num_actions));
        mdp.insert("branching", static_cast<std::int64_t>(g.branching));
        mdp.insert("discount", g.discount);
        mdp.insert("seed", static_cast<std::int64_t>(g.seed));
        mdp.insert("per_seed", spec.mdp.garnet_per_seed);
    } else {
        mdp.insert("kind", "file");
        mdp.insert("path", spec.mdp.path);
    }

    toml::table alg;
    alg.insert("name", spec.algorithm.name());
    if (spec.algorithm.kind == AlgorithmSpec::Kind::Mdvi) {
        const auto& c = spec.algorithm.mdvi;
        alg.insert("alpha", c.alpha);
        alg.insert("beta", c.beta);
        alg.insert("iterations", static_cast<std::int64_t>(c.iterations));
        alg.insert("samples", static_cast<std::int64_t>(c.samples_per_update));
        alg.insert("exact", c.exact_mode);
    } else {
        const auto& c = spec.algorithm.qlearning;
        alg.insert("iterations", static_cast<std::int64_t>(c.iterations));
        alg.insert("samples", static_cast<std::int64_t>(c.samples_per_update));
        alg.insert("rate_exponent", c.rate_exponent);
    }

    toml::table exp;
    toml::array errors;
    for (double e : spec.errors) errors.push_back(e);
    exp.insert("errors", errors);
    toml::array seeds;
    for (auto s : spec.seeds) seeds.push_back(static_cast<std::int64_t>(s));
    exp.insert("seeds", seeds);
    if (spec.max_samples) exp.insert("max_samples", static_cast<std::int64_t>(*spec.max_samples));
    exp.insert("record_every", static_cast<std::int64_t>(spec.record_every));
    exp.insert("nonstationary", spec.nonstationary);
    exp.insert("threads", static_cast<std::int64_t>(spec.threads));
    exp.insert("timing", spec.timing);
    exp.insert("stop_at_crossing", spec.stop_at_crossing);

    toml::table root;
    root.insert("mdp", mdp);
    root.insert("algorithm", alg);
    root.insert("experiment", exp);
    return root;
}

inline std::string spec_to_toml_string(const ExperimentSpec& spec) {
    std::ostringstream os;
    os << spec_to_toml(spec) << '\n';
    return os.str();
}

/// Executes a spec and writes records.csv, sweep.json, resolved_config.toml
/// and, with two or more seeds and full-length runs, convergence.csv.
inline ExperimentOutputs run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const SweepResult sweep = sample_complexity_sweep(spec);
    ExperimentOutputs out;
    out.records_csv = out_dir / "records.csv";
    out.sweep_json = out_dir / "sweep.json";
    out.resolved_config = out_dir / "resolved_config.toml";

    const auto open = [](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
        return f;
    };
    {
        auto f = open(out.records_csv);
        write_records_csv(f, sweep.per_seed, spec.nonstationary);
    }
    {
        auto f = open(out.sweep_json);
        f << sweep_to_json(sweep).dump(2) << '\n';
    }
    {
        ExperimentSpec resolved = spec;
        resolved.normalize();
        auto f = open(out.resolved_config);
        f << spec_to_toml_string(resolved);
    }
    if (sweep.per_seed.size() >= 2 && !spec.stop_at_crossing) {
        std::vector<std::vector<RunRecord>> runs;
        for (const auto& r : sweep.per_seed) runs.push_back(r.records);
        out.convergence_csv = out_dir / "convergence.csv";
        auto f = open(*out.convergence_csv);
        write_convergence_csv(f, aggregate_convergence(runs));
    }
    return out;
}

inline ExperimentOutputs run_experiment(const std::filesystem::path& config, const std::filesystem::path& out_dir) {
    return run_experiment(load_experiment_spec(config), out_dir);
}

} // namespace mdvi
