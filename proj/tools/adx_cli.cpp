// Command-line front end: dual solving, policy simulation, fluid scoring,
// mixture estimation, the DP oracle, and the experiment drivers.
//
// Exit codes: 0 success, 2 config error, 3 numeric non-convergence.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "adx/experiments/experiments.hpp"
#include "adx/market/json_io.hpp"
#include "adx/policy/dp.hpp"
#include "adx/policy/json_io.hpp"
#include "adx/policy/simulate.hpp"
#include "adx/tiebreak/tiebreak.hpp"
#include "adx/version.hpp"

using nlohmann::json;
using namespace adx;

namespace {

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::istringstream is(csv);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

std::vector<long> parse_longs(const std::string& csv) {
    std::vector<long> out;
    std::istringstream is(csv);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stol(tok));
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open output file: " + path);
    return f;
}

json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open: " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("JSON parse error in ") + path + ": " + e.what());
    }
    return j;
}

// Sidecar with full provenance next to a CSV result.
void write_sidecar(const std::string& csv_path, const json& spec) {
    json j;
    j["spec"] = spec;
    j["version"] = version_string();
    std::ofstream f(csv_path + ".json");
    f << j.dump(2) << "\n";
}

dual::SolveOptions solver_options(double grad_tol, double integ_tol, int max_iters,
                                  int mc_samples, std::uint64_t seed) {
    dual::SolveOptions opts;
    opts.gradient_tolerance = grad_tol;
    opts.integration_tolerance = integ_tol;
    opts.max_iters = max_iters;
    opts.mc_samples = mc_samples;
    opts.seed = seed;
    return opts;
}

int cmd_solve_dual(const std::string& model_path, int grid_points,
                   const dual::SolveOptions& opts, const std::string& out_path,
                   const std::string& policy_out, const std::string& curve_out) {
    market::MarketModel model = market::load_model(model_path);
    exchange::RevenueCurve curve = exchange::build_revenue_curve(model.bids(), grid_points);
    dual::DualSolution sol = dual::solve_dual(model, curve, opts);

    json out = policy::dual_solution_to_json(model, sol);
    if (!out_path.empty()) {
        open_out(out_path) << out.dump(2) << "\n";
    } else {
        std::cout << out.dump(2) << "\n";
    }
    if (!curve_out.empty()) {
        auto f = open_out(curve_out);
        curve.write_csv(f);
    }
    if (!policy_out.empty()) {
        auto ties = tiebreak::tie_probabilities(model, curve, sol.v, opts);
        auto flow = tiebreak::solve_tiebreak_flow(ties.table, model.rho());
        policy::PolicyConfig cfg;
        cfg.v = sol.v;
        cfg.gamma = model.gamma();
        cfg.scales.assign(model.advertiser_count(), model.gamma());
        if (flow.feasible) cfg.rule = flow.rule;
        json pj = policy::policy_to_json(model, cfg);
        if (!ties.warning.empty()) pj["warning"] = ties.warning;
        pj["tie_flow_feasible"] = flow.feasible;
        open_out(policy_out) << pj.dump(2) << "\n";
    }
    if (!sol.converged)
        throw NumericError("dual solve did not reach stationarity: " + sol.note);
    return 0;
}

int cmd_simulate(const std::string& model_path, const std::string& policy_path, long n,
                 int reps, std::uint64_t seed, int grid_points, const std::string& out_path,
                 unsigned threads) {
    market::MarketModel model = market::load_model(model_path);
    exchange::RevenueCurve curve = exchange::build_revenue_curve(model.bids(), grid_points);
    policy::PolicyConfig cfg = policy::policy_from_json(model, read_json(policy_path));

    std::vector<policy::SimOutcome> outcomes(static_cast<std::size_t>(reps));
    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
        Rng sub = Rng::substream(seed, r);
        outcomes[r] = policy::simulate_policy(model, curve, cfg, n, sub.next_u64());
    }, threads);

    auto f = open_out(out_path);
    f << "rep,yield,adx_revenue";
    for (const auto& a : model.advertisers()) f << ",quality_" << a.id;
    f << ",leftover_onset\n";
    for (int r = 0; r < reps; ++r) {
        const auto& o = outcomes[static_cast<std::size_t>(r)];
        f << r << ',' << o.yield << ',' << o.adx_revenue;
        for (double q : o.quality) f << ',' << q;
        f << ',' << o.leftover_onset << '\n';
    }
    return 0;
}

int cmd_fluid(const std::string& model_path, const std::string& v_path, int grid_points,
              const dual::SolveOptions& opts, const std::string& out_path) {
    market::MarketModel model = market::load_model(model_path);
    exchange::RevenueCurve curve = exchange::build_revenue_curve(model.bids(), grid_points);
    json vj = read_json(v_path);
    dual::DualVector v(model.advertiser_count(), 0.0);
    const json& vv = vj.contains("v") ? vj.at("v") : vj;
    for (auto it = vv.begin(); it != vv.end(); ++it)
        v[static_cast<std::size_t>(model.advertiser_index(it.key()))] = it.value().get<double>();

    dual::MixtureEvaluator ev(model, curve, opts);
    auto sol = fluid::fluid_evaluate(ev, v);

    auto f = open_out(out_path);
    f << "t";
    for (const auto& a : model.advertisers()) f << ",S_" << a.id;
    f << ",J\n";
    auto emit = [&](double t, const std::vector<double>& s, double jv) {
        f << t;
        for (double x : s) f << ',' << x;
        f << ',' << jv << '\n';
    };
    std::vector<double> s(model.advertiser_count(), 0.0);
    double j = 0.0;
    emit(0.0, s, j);
    for (const auto& piece : sol.pieces) {
        double dt = piece.t_end - piece.t_start;
        for (std::size_t a = 0; a < s.size(); ++a) s[a] += piece.rates[a] * dt;
        j += piece.yield_rate * dt;
        emit(piece.t_end, s, j);
    }
    std::cerr << "J(1) = " << sol.total_yield << " (adx " << sol.adx_revenue << ", quality "
              << sol.quality_total() << ")" << (sol.unmet_demand ? " [unmet demand]" : "")
              << "\n";
    return 0;
}

int cmd_estimate(const std::string& samples_path, const std::string& rho_csv,
                 const std::string& penalty_csv, double gamma, const std::string& bids_path,
                 int grid_points, const std::string& out_path,
                 const std::string& curve_out) {
    std::ifstream sf(samples_path);
    if (!sf) throw ConfigError("cannot open sample log: " + samples_path);
    std::vector<std::string> ids;
    auto samples = market::read_sample_csv(sf, &ids);
    auto fit = market::fit_mixture(samples);
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";

    std::vector<double> rho = parse_doubles(rho_csv);
    if (rho.size() != ids.size())
        throw ConfigError("--rho must list one value per sample-log column");
    std::vector<double> penalties(ids.size(), 0.0);
    if (!penalty_csv.empty()) {
        penalties = parse_doubles(penalty_csv);
        if (penalties.size() != ids.size())
            throw ConfigError("--penalty must list one value per sample-log column");
    }
    std::vector<market::Advertiser> advs;
    for (std::size_t a = 0; a < ids.size(); ++a)
        advs.push_back({ids[a], rho[a], penalties[a], {}});

    exchange::BidModel bids = exchange::BidModel::null_exchange();
    if (!bids_path.empty()) {
        std::ifstream bf(bids_path);
        if (!bf) throw ConfigError("cannot open bid log: " + bids_path);
        bids = exchange::BidModel::empirical(market::read_bid_csv(bf));
    }
    market::MarketModel model(std::move(advs), fit.types, gamma, std::move(bids));
    open_out(out_path) << market::model_to_json(model).dump(2) << "\n";
    if (!curve_out.empty()) {
        exchange::RevenueCurve curve =
            exchange::build_revenue_curve(model.bids(), grid_points);
        auto f = open_out(curve_out);
        curve.write_csv(f);
    }
    return 0;
}

int cmd_dp_oracle(const std::string& instance_path, long n, const std::string& caps_csv,
                  const std::string& out_path) {
    json j = read_json(instance_path);
    policy::DiscreteInstance inst;
    for (const auto& r : j.at("rho")) inst.rho.push_back(r.get<double>());
    inst.gamma = j.value("gamma", 1.0);
    for (const auto& qa : j.at("quality_atoms")) {
        policy::QualityAtom atom;
        atom.prob = qa.at("prob").get<double>();
        for (const auto& q : qa.at("q")) atom.q.push_back(q.get<double>());
        inst.quality_atoms.push_back(std::move(atom));
    }
    for (const auto& ba : j.at("bid_atoms"))
        inst.bid_atoms.push_back({ba.at("prob").get<double>(), ba.at("b1").get<double>(),
                                  ba.value("b2", 0.0)});
    std::vector<long> caps = caps_csv.empty() ? policy::capacities_from_rho(inst.rho, n)
                                              : parse_longs(caps_csv);
    auto res = policy::dp_solve(inst, n, caps);

    exchange::RevenueCurve curve =
        exchange::build_revenue_curve(policy::to_bid_model(inst), 65);
    auto ev = policy::atom_evaluator(inst, curve);
    dual::DualSolution sol = dual::solve_dual_discrete(ev);
    json out;
    out["value"] = res.value;
    out["states"] = res.states;
    out["dap_upper_bound"] = policy::dap_upper_bound(sol.eval.objective, n);
    out["capacity"] = caps;
    if (out_path.empty())
        std::cout << out.dump(2) << "\n";
    else
        open_out(out_path) << out.dump(2) << "\n";
    return 0;
}

int cmd_pareto(const std::string& model_path, const std::string& gammas_csv, int grid_points,
               const dual::SolveOptions& opts, const std::string& out_path, unsigned threads) {
    market::MarketModel model = market::load_model(model_path);
    exchange::RevenueCurve curve = exchange::build_revenue_curve(model.bids(), grid_points);
    auto rows = experiments::pareto_sweep(model, curve, parse_doubles(gammas_csv), opts,
                                          threads);
    auto f = open_out(out_path);
    f << "gamma,quality,revenue,yield,converged\n";
    for (const auto& r : rows) {
        if (std::isinf(r.gamma))
            f << "inf";
        else
            f << r.gamma;
        f << ',' << r.quality << ',' << r.revenue << ',';
        if (std::isinf(r.yield))
            f << "inf";
        else
            f << r.yield;
        f << ',' << (r.converged ? 1 : 0) << '\n';
    }
    json spec{{"command", "pareto"}, {"model", model_path}, {"gammas", gammas_csv},
              {"grid_points", grid_points}};
    write_sidecar(out_path, spec);
    return 0;
}

int cmd_regret(const std::string& model_path, const std::string& n_csv, int reps,
               std::uint64_t seed, int grid_points, const dual::SolveOptions& opts,
               const std::string& out_path, unsigned threads) {
    market::MarketModel model = market::load_model(model_path);
    exchange::RevenueCurve curve = exchange::build_revenue_curve(model.bids(), grid_points);
    dual::DualSolution sol = dual::solve_dual(model, curve, opts);
    if (!sol.converged) throw NumericError("dual solve did not converge");
    auto ties = tiebreak::tie_probabilities(model, curve, sol.v, opts);
    auto flow = tiebreak::solve_tiebreak_flow(ties.table, model.rho());
    policy::PolicyConfig cfg;
    cfg.v = sol.v;
    cfg.gamma = model.gamma();
    cfg.scales.assign(model.advertiser_count(), model.gamma());
    if (flow.feasible) cfg.rule = flow.rule;
    policy::MarketSource src{&model};
    auto rows = experiments::regret_experiment(src, model.rho(), curve, cfg,
                                               sol.eval.objective, parse_longs(n_csv), reps,
                                               seed, threads);
    auto f = open_out(out_path);
    f << "n,mean_regret,band95,bound\n";
    for (const auto& r : rows)
        f << r.n << ',' << r.mean_regret << ',' << r.band << ',' << r.bound << '\n';
    json spec{{"command", "regret"}, {"model", model_path}, {"n_grid", n_csv},
              {"reps", reps}, {"seed", seed}};
    write_sidecar(out_path, spec);
    return 0;
}

int cmd_efficiency(const std::string& family, double theta, double sigma, double rho,
                   const std::string& m_csv, int reps, std::uint64_t seed,
                   const std::string& out_path, unsigned threads) {
    experiments::EffFamily fam;
    if (family == "exponential")
        fam = experiments::EffFamily::Exponential;
    else if (family == "normal")
        fam = experiments::EffFamily::NormalKnownVar;
    else
        throw ConfigError("unsupported family: " + family + " (exponential | normal)");
    auto rows = experiments::estimator_efficiency(fam, theta, sigma, rho, parse_longs(m_csv),
                                                  reps, seed, threads);
    auto f = open_out(out_path);
    f << "m,var_saa_m,var_mle_m,ratio,analytic\n";
    for (const auto& r : rows)
        f << r.m << ',' << r.var_saa_m << ',' << r.var_mle_m << ',' << r.ratio << ','
          << r.analytic << '\n';
    json spec{{"command", "efficiency"}, {"family", family}, {"theta", theta},
              {"sigma", sigma}, {"rho", rho}, {"m_grid", m_csv}, {"reps", reps},
              {"seed", seed}};
    write_sidecar(out_path, spec);
    return 0;
}

int cmd_compare_pd(const std::string& model_path, const std::string& m_csv, int reps,
                   std::uint64_t seed, const dual::SolveOptions& opts,
                   const std::string& out_path, unsigned threads) {
    market::MarketModel model = market::load_model(model_path);
    auto rows = experiments::compare_pd(model, parse_longs(m_csv), reps, seed, opts, threads);
    auto f = open_out(out_path);
    f << "m,est_mean,est_std,pd_mean,pd_std,opt\n";
    for (const auto& r : rows)
        f << r.m << ',' << r.est_mean << ',' << r.est_std << ',' << r.pd_mean << ','
          << r.pd_std << ',' << r.opt << '\n';
    json spec{{"command", "compare-pd"}, {"model", model_path}, {"m_grid", m_csv},
              {"reps", reps}, {"seed", seed}};
    write_sidecar(out_path, spec);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Yield optimization over reservation contracts and an ad exchange"};
    app.require_subcommand(1);

    // shared solver knobs
    double grad_tol = 1e-6, integ_tol = 1e-8;
    int max_iters = 400, mc_samples = 200000, grid_points = 100;
    std::uint64_t seed = 12345;
    unsigned threads = 0;
    app.add_option("--grad-tol", grad_tol, "solver gradient tolerance")->capture_default_str();
    app.add_option("--integ-tol", integ_tol, "quadrature tolerance")->capture_default_str();
    app.add_option("--max-iters", max_iters, "solver iteration cap")->capture_default_str();
    app.add_option("--mc-samples", mc_samples, "Monte Carlo fallback sample size")
        ->capture_default_str();
    app.add_option("--grid-points", grid_points, "revenue-curve grid points")
        ->capture_default_str();
    app.add_option("--seed", seed, "random seed")->capture_default_str();
    app.add_option("--threads", threads, "worker threads (0 = hardware)")
        ->capture_default_str();

    std::string model_path, out_path, policy_path, v_path, curve_out, policy_out;
    std::string samples_path, bids_path, rho_csv, penalty_csv, instance_path, caps_csv;
    std::string gammas_csv = "0,0.001,0.01,0.05,0.1,0.25,0.5,1,10";
    std::string n_csv = "100,1000,10000", m_csv = "100,1000,10000";
    std::string family = "exponential";
    double theta = 1.0, sigma = 1.0, rho = 0.5, gamma = 1.0;
    long n = 100000;
    int reps = 500;

    auto* sd = app.add_subcommand("solve-dual", "solve the deterministic-approximation dual");
    sd->add_option("--model", model_path, "model config JSON")->required();
    sd->add_option("--out", out_path, "solution JSON (stdout if omitted)");
    sd->add_option("--policy-out", policy_out, "policy JSON with tie-breaking rule");
    sd->add_option("--curve-out", curve_out, "revenue curve CSV (s,p,r)");

    auto* sim = app.add_subcommand("simulate", "run the stochastic bid-price policy");
    sim->add_option("--model", model_path)->required();
    sim->add_option("--policy", policy_path, "policy JSON from solve-dual")->required();
    sim->add_option("--n", n, "impressions per replication")->capture_default_str();
    sim->add_option("--reps", reps)->capture_default_str();
    sim->add_option("--out", out_path, "runs CSV")->required();

    auto* fl = app.add_subcommand("fluid", "fluid-limit trajectory of a bid-price vector");
    fl->add_option("--model", model_path)->required();
    fl->add_option("--v", v_path, "bid prices JSON ({id: v} or solve-dual output)")
        ->required();
    fl->add_option("--out", out_path, "trajectory CSV")->required();

    auto* est = app.add_subcommand("estimate", "fit the mixture model from sample logs");
    est->add_option("--samples", samples_path, "sample CSV (one column per advertiser)")
        ->required();
    est->add_option("--rho", rho_csv, "per-advertiser capacity ratios")->required();
    est->add_option("--penalty", penalty_csv, "per-advertiser goodwill penalties");
    est->add_option("--gamma", gamma, "trade-off weight")->capture_default_str();
    est->add_option("--bids", bids_path, "bid log CSV (b1,b2) for an empirical exchange");
    est->add_option("--out", out_path, "model JSON")->required();
    est->add_option("--curve-out", curve_out, "estimated revenue curve CSV");

    auto* dp = app.add_subcommand("dp-oracle", "exact DP value for a tiny discrete instance");
    dp->add_option("--instance", instance_path, "instance JSON")->required();
    dp->add_option("--n", n, "horizon")->required();
    dp->add_option("--caps", caps_csv, "capacities (default: round(rho*n))");
    dp->add_option("--out", out_path, "result JSON (stdout if omitted)");

    auto* pa = app.add_subcommand("pareto", "trade-off sweep over gamma");
    pa->add_option("--model", model_path)->required();
    pa->add_option("--gammas", gammas_csv, "gamma grid")->capture_default_str();
    pa->add_option("--out", out_path, "frontier CSV")->required();

    auto* rg = app.add_subcommand("regret", "horizon sweep of policy regret");
    rg->add_option("--model", model_path)->required();
    rg->add_option("--n-grid", n_csv)->capture_default_str();
    rg->add_option("--reps", reps)->capture_default_str();
    rg->add_option("--out", out_path)->required();

    auto* ef = app.add_subcommand("efficiency", "quantile vs MLE estimator efficiency");
    ef->add_option("--family", family, "exponential | normal")->capture_default_str();
    ef->add_option("--theta", theta)->capture_default_str();
    ef->add_option("--sigma", sigma, "known sd (normal family)")->capture_default_str();
    ef->add_option("--rho", rho)->capture_default_str();
    ef->add_option("--m-grid", m_csv)->capture_default_str();
    ef->add_option("--reps", reps)->capture_default_str();
    ef->add_option("--out", out_path)->required();

    auto* pd = app.add_subcommand("compare-pd", "parametric vs primal-dual training study");
    pd->add_option("--model", model_path, "no-exchange model JSON")->required();
    pd->add_option("--m-grid", m_csv)->capture_default_str();
    pd->add_option("--reps", reps)->capture_default_str();
    pd->add_option("--out", out_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        dual::SolveOptions opts =
            solver_options(grad_tol, integ_tol, max_iters, mc_samples, seed);
        if (sd->parsed())
            return cmd_solve_dual(model_path, grid_points, opts, out_path, policy_out,
                                  curve_out);
        if (sim->parsed())
            return cmd_simulate(model_path, policy_path, n, reps, seed, grid_points,
                                out_path, threads);
        if (fl->parsed()) return cmd_fluid(model_path, v_path, grid_points, opts, out_path);
        if (est->parsed())
            return cmd_estimate(samples_path, rho_csv, penalty_csv, gamma, bids_path,
                                grid_points, out_path, curve_out);
        if (dp->parsed()) return cmd_dp_oracle(instance_path, n, caps_csv, out_path);
        if (pa->parsed())
            return cmd_pareto(model_path, gammas_csv, grid_points, opts, out_path, threads);
        if (rg->parsed())
            return cmd_regret(model_path, n_csv, reps, seed, grid_points, opts, out_path,
                              threads);
        if (ef->parsed())
            return cmd_efficiency(family, theta, sigma, rho, m_csv, reps, seed, out_path,
                                  threads);
        if (pd->parsed())
            return cmd_compare_pd(model_path, m_csv, reps, seed, opts, out_path, threads);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
