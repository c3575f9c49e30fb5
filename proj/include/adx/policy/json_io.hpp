#pragma once

// JSON wire formats for dual solutions and policies. Tie subsets serialize as
// sorted id lists joined by commas, with "0" for the outside option.

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adx/core/errors.hpp"
#include "adx/dual/solve.hpp"
#include "adx/market/model.hpp"
#include "adx/policy/simulate.hpp"
#include "adx/tiebreak/types.hpp"

namespace adx::policy {

using nlohmann::json;

inline json dual_solution_to_json(const market::MarketModel& model,
                                  const dual::DualSolution& sol) {
    json j;
    json v;
    for (std::size_t a = 0; a < sol.v.size(); ++a)
        v[model.advertisers()[a].id] = sol.v[a];
    j["v"] = v;
    j["objective"] = sol.eval.objective;
    j["converged"] = sol.converged;
    j["iterations"] = sol.iterations;
    if (!sol.note.empty()) j["note"] = sol.note;
    return j;
}

inline std::string subset_key(const market::MarketModel& model, tiebreak::SubsetMask mask) {
    const int A = static_cast<int>(model.advertiser_count());
    std::vector<std::string> ids;
    if (mask & tiebreak::outside_bit(A)) ids.push_back("0");
    for (int a = 0; a < A; ++a)
        if (mask & tiebreak::advertiser_bit(a)) ids.push_back(model.advertisers()[a].id);
    std::sort(ids.begin(), ids.end());
    std::string key;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) key += ',';
        key += ids[i];
    }
    return key;
}

inline json tiebreak_to_json(const market::MarketModel& model,
                             const tiebreak::TieBreakRule& rule) {
    json j = json::object();
    const int A = static_cast<int>(model.advertiser_count());
    for (const auto& [mask, y] : rule.flows) {
        double total = 0.0;
        for (double f : y) total += f;
        if (total <= 0.0) continue;
        json entry = json::object();
        for (int slot = 0; slot <= A; ++slot) {
            if (y[static_cast<std::size_t>(slot)] <= 0.0) continue;
            std::string id = slot == A ? "0" : model.advertisers()[slot].id;
            entry[id] = y[static_cast<std::size_t>(slot)] / total;
        }
        j[subset_key(model, mask)] = entry;
    }
    return j;
}

inline tiebreak::TieBreakRule tiebreak_from_json(const market::MarketModel& model,
                                                 const json& j) {
    tiebreak::TieBreakRule rule;
    const int A = static_cast<int>(model.advertiser_count());
    rule.advertiser_count = A;
    for (auto it = j.begin(); it != j.end(); ++it) {
        tiebreak::SubsetMask mask = 0;
        std::istringstream ks(it.key());
        std::string id;
        while (std::getline(ks, id, ',')) {
            if (id == "0")
                mask |= tiebreak::outside_bit(A);
            else
                mask |= tiebreak::advertiser_bit(model.advertiser_index(id));
        }
        std::vector<double> y(static_cast<std::size_t>(A) + 1, 0.0);
        for (auto fit = it.value().begin(); fit != it.value().end(); ++fit) {
            int slot = fit.key() == "0" ? A : model.advertiser_index(fit.key());
            y[static_cast<std::size_t>(slot)] = fit.value().get<double>();
        }
        rule.flows[mask] = std::move(y);
    }
    return rule;
}

inline json policy_to_json(const market::MarketModel& model, const PolicyConfig& cfg) {
    json j;
    json v;
    for (std::size_t a = 0; a < cfg.v.size(); ++a)
        v[model.advertisers()[a].id] = cfg.v[a];
    j["v"] = v;
    j["gamma"] = cfg.gamma;
    if (!cfg.rule.flows.empty()) j["tiebreak"] = tiebreak_to_json(model, cfg.rule);
    return j;
}

inline PolicyConfig policy_from_json(const market::MarketModel& model, const json& j) {
    PolicyConfig cfg;
    cfg.v.assign(model.advertiser_count(), 0.0);
    const json& v = j.at("v");
    for (auto it = v.begin(); it != v.end(); ++it)
        cfg.v[static_cast<std::size_t>(model.advertiser_index(it.key()))] =
            it.value().get<double>();
    cfg.gamma = j.value("gamma", model.gamma());
    cfg.scales.assign(model.advertiser_count(), cfg.gamma);
    if (j.contains("tiebreak")) cfg.rule = tiebreak_from_json(model, j.at("tiebreak"));
    return cfg;
}

} // namespace adx::policy
