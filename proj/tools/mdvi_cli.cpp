// mdvi: command-line front end.
//
//   mdvi garnet gen --states 8 --actions 2 --branching 2 --discount 0.9 --seed 0 --out mdp.json
//   mdvi run mdvi --mdp mdp.json --alpha 0.9 --beta inf --iters 100 --samples 4 --seed 0 [--exact] --trace t.csv
//   mdvi run qlearning --mdp mdp.json --iters 100 --samples 1 --rate-exp 1 --seed 0 --trace t.csv
//   mdvi sweep --config spec.toml --out results/ [--threads N]
//   mdvi verify lemmas --mdp mdp.json --alpha 0.9 --iters 50 --samples 4 --seeds 20 --report report.json
//   mdvi params --theorem 1 --gamma 0.9 --eps 0.1 --delta 0.1 --states 8 --actions 2
//
// Exit status: 0 success, 1 invalid input or I/O failure, 2 lemma check failure.

#include "mdvi/diagnostics.hpp"
#include "mdvi/experiment_config.hpp"
#include "mdvi/garnet.hpp"
#include "mdvi/harness.hpp"
#include "mdvi/mdp_json.hpp"
#include "mdvi/theorem.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace mdvi;

constexpr int kExitInvalid = 1;
constexpr int kExitLemma = 2;

double parse_beta(const std::string& text) {
    if (text == "inf" || text == "infinity") return kInfiniteBeta;
    std::size_t used = 0;
    double beta = 0.0;
    try {
        beta = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size()) throw validation_error("--beta must be a positive number or 'inf'");
    return beta;
}

std::string policy_string(const DetPolicy& pi) {
    std::string s;
    for (std::size_t x = 0; x < pi.size(); ++x) {
        if (x) s += ' ';
        s += std::to_string(pi[x]);
    }
    return s;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    return f;
}

VTable optimal_values(const TabularMdp& mdp) {
    return policy_evaluation(mdp, exact_optimal(mdp, 1e-10).pi_star);
}

struct GarnetArgs {
    GarnetParams params;
    std::string out;
};

int cmd_garnet(const GarnetArgs& a) {
    save_mdp(generate_garnet(a.params), a.out);
    return 0;
}

struct MdviArgs {
    std::string mdp;
    double alpha = 0.9;
    std::string beta = "inf";
    int iters = 100;
    int samples = 1;
    std::uint64_t seed = 0;
    bool exact = false;
    std::string trace;
};

int cmd_run_mdvi(const MdviArgs& a) {
    const TabularMdp mdp = load_mdp(a.mdp);
    MdviConfig cfg;
    cfg.alpha = a.alpha;
    cfg.beta = parse_beta(a.beta);
    cfg.iterations = a.iters;
    cfg.samples_per_update = a.samples;
    cfg.seed = a.seed;
    cfg.exact_mode = a.exact;
    cfg.validate();
    const VTable v_star = optimal_values(mdp);
    const MdviRun run = mdvi_run(mdp, cfg);

    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!a.trace.empty()) {
        file = open_out(a.trace);
        os = &file;
    }
    *os << "k,samples,sup_error_last,eps_sup,E_sup,v_sup,policy\n";
    for (std::size_t k = 0; k < run.trace.size(); ++k) {
        const auto& t = run.trace[k];
        const double err = sup_norm(VTable(v_star - policy_evaluation(mdp, run.policies[k])));
        *os << t.k << ',' << t.samples_used << ',' << format_double(err) << ',' << format_double(sup_norm(t.eps))
            << ',' << format_double(sup_norm(t.E)) << ',' << format_double(sup_norm(t.v)) << ','
            << policy_string(t.policy) << '\n';
    }
    return 0;
}

struct QLearningArgs {
    std::string mdp;
    int iters = 100;
    int samples = 1;
    double rate_exp = 1.0;
    std::uint64_t seed = 0;
    std::string trace;
};

int cmd_run_qlearning(const QLearningArgs& a) {
    const TabularMdp mdp = load_mdp(a.mdp);
    QLearningConfig cfg;
    cfg.iterations = a.iters;
    cfg.samples_per_update = a.samples;
    cfg.rate_exponent = a.rate_exp;
    cfg.seed = a.seed;
    cfg.validate();
    const VTable v_star = optimal_values(mdp);

    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!a.trace.empty()) {
        file = open_out(a.trace);
        os = &file;
    }
    *os << "k,samples,sup_error_last,q_sup,policy\n";
    q_learning_stream(mdp, cfg, [&](const QLearningStep& st) {
        const double err = sup_norm(VTable(v_star - policy_evaluation(mdp, st.policy)));
        *os << st.k << ',' << st.samples_used << ',' << format_double(err) << ',' << format_double(sup_norm(st.q))
            << ',' << policy_string(st.policy) << '\n';
        return true;
    });
    return 0;
}

struct SweepArgs {
    std::string config;
    std::string out = "results";
    int threads = 0;
};

int cmd_sweep(const SweepArgs& a) {
    ExperimentSpec spec = load_experiment_spec(a.config);
    if (a.threads > 0) spec.threads = a.threads;
    const ExperimentOutputs out = run_experiment(spec, a.out);
    std::cout << "records: " << out.records_csv.string() << '\n' << "sweep: " << out.sweep_json.string() << '\n';
    if (out.convergence_csv) std::cout << "convergence: " << out.convergence_csv->string() << '\n';
    std::cout << "config: " << out.resolved_config.string() << '\n';
    return 0;
}

struct VerifyArgs {
    std::string mdp;
    double alpha = 0.9;
    int iters = 50;
    int samples = 4;
    int seeds = 20;
    double delta = 0.1;
    std::string report;
};

int cmd_verify(const VerifyArgs& a) {
    using nlohmann::json;
    const TabularMdp mdp = load_mdp(a.mdp);
    if (a.seeds < 1) throw validation_error("--seeds must be >= 1");
    MdviConfig cfg;
    cfg.alpha = a.alpha;
    cfg.iterations = a.iters;
    cfg.samples_per_update = a.samples;
    cfg.validate();

    const double H = mdp.horizon();
    const double s_tol = 1e-9 * a.iters * H;
    const bool weighted = a.alpha < 1.0;
    LemmaSuiteResult agg;
    std::vector<std::vector<IterationTrace>> traces;
    VTable v_star;
    for (int seed = 0; seed < a.seeds; ++seed) {
        cfg.seed = algorithm_seed_for(static_cast<std::uint64_t>(seed));
        const MdviRun run = mdvi_run(mdp, cfg);
        const LemmaContext ctx(mdp, run);
        if (seed == 0) v_star = ctx.v_star();
        const LemmaSuiteResult r = run_lemma_suite(ctx);
        agg.nonstationary_ok &= r.nonstationary_ok;
        agg.last_policy_ok &= r.last_policy_ok;
        agg.delta_ok &= r.delta_ok;
        agg.v_bounded_ok &= r.v_bounded_ok;
        agg.v_error_ok &= r.v_error_ok;
        agg.s_identity_residual = std::max(agg.s_identity_residual, r.s_identity_residual);
        agg.nonstationary_worst = std::min(agg.nonstationary_worst, r.nonstationary_worst);
        agg.last_policy_worst = std::min(agg.last_policy_worst, r.last_policy_worst);
        agg.delta_worst = std::min(agg.delta_worst, r.delta_worst);
        agg.v_error_worst = std::min(agg.v_error_worst, r.v_error_worst);
        agg.v_bound_worst = std::min(agg.v_bound_worst, r.v_bound_worst);
        agg.coarse_nonstationary_max = std::max(agg.coarse_nonstationary_max, r.coarse_nonstationary_max);
        agg.coarse_last_policy_max = std::max(agg.coarse_last_policy_max, r.coarse_last_policy_max);
        traces.push_back(run.trace);
    }
    const EventThresholds th = concentration_thresholds(mdp, a.alpha, a.iters, a.samples, a.delta, v_star);
    const EventRates rates = event_violation_rates(traces, th);

    const auto lemma = [](bool available, bool pass, double worst) {
        if (!available) return json{{"pass", nullptr}, {"worst_slack", nullptr}, {"available", false}};
        return json{{"pass", pass}, {"worst_slack", worst}, {"available", true}};
    };
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    const bool s_ok = agg.s_identity_residual <= s_tol;
    json report{
        {"schema_version", 1},
        {"alpha", a.alpha},
        {"iterations", a.iters},
        {"samples", a.samples},
        {"seeds", a.seeds},
        {"lemmas",
         {{"s_identity", {{"pass", s_ok}, {"max_residual", agg.s_identity_residual}, {"tolerance", s_tol}}},
          {"nonstationary_bound", lemma(weighted, agg.nonstationary_ok, agg.nonstationary_worst)},
          {"last_policy_bound", lemma(weighted, agg.last_policy_ok, agg.last_policy_worst)},
          {"delta_bound", lemma(true, agg.delta_ok, agg.delta_worst)},
          {"v_bounded", lemma(true, agg.v_bounded_ok, agg.v_bound_worst)},
          {"v_error_bound", lemma(true, agg.v_error_ok, agg.v_error_worst)}}},
        {"events",
         {{"delta", a.delta},
          {"e1_rate", opt(rates.e1)},
          {"e2_rate", rates.e2},
          {"e3_rate", opt(rates.e3)},
          {"e4_rate", rates.e4},
          {"e1_threshold", opt(th.e1)},
          {"e2_threshold", th.e2}}},
        {"monitored",
         {{"coarse_nonstationary_max_ratio", weighted ? json(agg.coarse_nonstationary_max) : json(nullptr)},
          {"coarse_last_policy_max_ratio", weighted ? json(agg.coarse_last_policy_max) : json(nullptr)}}}};

    const std::string text = report.dump(2);
    if (!a.report.empty()) {
        auto f = open_out(a.report);
        f << text << '\n';
    }
    std::cout << text << '\n';
    return (agg.ok() && s_ok) ? 0 : kExitLemma;
}

struct ParamsArgs {
    int theorem = 1;
    double gamma = 0.9;
    double eps = 0.1;
    double delta = 0.1;
    std::size_t states = 8;
    std::size_t actions = 2;
    std::array<double, 4> c{1.0, 1.0, 1.0, 1.0};
};

int cmd_params(const ParamsArgs& a) {
    const Regime regime = a.theorem == 1 ? Regime::NonStationary : Regime::LastPolicy;
    const TheoremParams p = theorem_params(regime, a.gamma, a.states, a.actions, a.eps, a.delta, a.c);
    std::cout << "alpha " << format_double(p.alpha) << '\n'
              << "K " << p.iterations << '\n'
              << "M " << p.samples_per_update << '\n';
    for (const auto& w : p.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mirror descent value iteration toolkit"};
    app.require_subcommand(1);
    int status = 0;

    GarnetArgs garnet;
    auto* g = app.add_subcommand("garnet", "Random Garnet MDPs");
    g->require_subcommand(1);
    auto* gen = g->add_subcommand("gen", "Generate a Garnet MDP as JSON");
    gen->add_option("--states", garnet.params.num_states)->required();
    gen->add_option("--actions", garnet.params.num_actions)->required();
    gen->add_option("--branching", garnet.params.branching)->required();
    gen->add_option("--discount", garnet.params.discount)->required();
    gen->add_option("--seed", garnet.params.seed);
    gen->add_option("--out", garnet.out)->required();
    gen->callback([&] { status = cmd_garnet(garnet); });

    auto* run = app.add_subcommand("run", "Run one algorithm on one MDP");
    run->require_subcommand(1);
    MdviArgs mdvi;
    auto* rm = run->add_subcommand("mdvi", "Sampled MDVI");
    rm->add_option("--mdp", mdvi.mdp)->required();
    rm->add_option("--alpha", mdvi.alpha);
    rm->add_option("--beta", mdvi.beta, "positive number or inf");
    rm->add_option("--iters", mdvi.iters);
    rm->add_option("--samples", mdvi.samples);
    rm->add_option("--seed", mdvi.seed);
    rm->add_flag("--exact", mdvi.exact, "exact expectations instead of samples");
    rm->add_option("--trace", mdvi.trace, "CSV output (stdout when omitted)");
    rm->callback([&] { status = cmd_run_mdvi(mdvi); });

    QLearningArgs ql;
    auto* rq = run->add_subcommand("qlearning", "Synchronous Q-learning");
    rq->add_option("--mdp", ql.mdp)->required();
    rq->add_option("--iters", ql.iters);
    rq->add_option("--samples", ql.samples);
    rq->add_option("--rate-exp", ql.rate_exp);
    rq->add_option("--seed", ql.seed);
    rq->add_option("--trace", ql.trace, "CSV output (stdout when omitted)");
    rq->callback([&] { status = cmd_run_qlearning(ql); });

    SweepArgs sweep;
    auto* sw = app.add_subcommand("sweep", "Run a TOML experiment spec");
    sw->add_option("--config", sweep.config)->required();
    sw->add_option("--out", sweep.out);
    sw->add_option("--threads", sweep.threads, "override experiment.threads");
    sw->callback([&] { status = cmd_sweep(sweep); });

    VerifyArgs verify;
    auto* ver = app.add_subcommand("verify", "Numerical lemma checks");
    ver->require_subcommand(1);
    auto* lem = ver->add_subcommand("lemmas", "Check the error-propagation lemmas on sampled runs");
    lem->add_option("--mdp", verify.mdp)->required();
    lem->add_option("--alpha", verify.alpha);
    lem->add_option("--iters", verify.iters);
    lem->add_option("--samples", verify.samples);
    lem->add_option("--seeds", verify.seeds);
    lem->add_option("--delta", verify.delta, "confidence level of the event thresholds");
    lem->add_option("--report", verify.report);
    lem->callback([&] { status = cmd_verify(verify); });

    ParamsArgs params;
    auto* par = app.add_subcommand("params", "alpha, K and M from the sample-complexity theorems");
    par->add_option("--theorem", params.theorem)->required()->check(CLI::IsMember({1, 2}));
    par->add_option("--gamma", params.gamma)->required();
    par->add_option("--eps", params.eps)->required();
    par->add_option("--delta", params.delta)->required();
    par->add_option("--states", params.states)->required();
    par->add_option("--actions", params.actions)->required();
    par->add_option("--c1", params.c[0]);
    par->add_option("--c2", params.c[1]);
    par->add_option("--c3", params.c[2]);
    par->add_option("--c4", params.c[3]);
    par->callback([&] { status = cmd_params(params); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    return status;
}
