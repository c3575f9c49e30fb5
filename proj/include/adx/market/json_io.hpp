#pragma once

// JSON model configs and CSV logs (bid logs `b1,b2`; sample logs with one
// column per advertiser, empty cell = not in type).

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adx/core/errors.hpp"
#include "adx/exchange/bid_model.hpp"
#include "adx/market/model.hpp"

namespace adx::market {

using nlohmann::json;

inline std::vector<exchange::BidSample> read_bid_csv(std::istream& is) {
    std::vector<exchange::BidSample> out;
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty bid log");
    // header `b1,b2`
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string c1, c2;
        if (!std::getline(ls, c1, ',') || !std::getline(ls, c2, ','))
            throw ConfigError("bid log row " + std::to_string(row) + " malformed");
        out.push_back({std::stod(c1), std::stod(c2)});
    }
    if (out.empty()) throw ConfigError("bid log has no samples");
    return out;
}

inline exchange::CdfFamily family_from_json(const json& j) {
    std::string fam = j.at("family").get<std::string>();
    if (fam == "uniform")
        return exchange::CdfFamily::uniform(j.at("low").get<double>(),
                                            j.at("high").get<double>());
    if (fam == "exponential")
        return exchange::CdfFamily::exponential(j.at("rate").get<double>());
    if (fam == "lognormal")
        return exchange::CdfFamily::lognormal(j.at("log_mean").get<double>(),
                                              j.at("log_sd").get<double>());
    throw ConfigError("unknown cdf family: " + fam);
}

inline json family_to_json(const exchange::CdfFamily& f) {
    json j;
    j["family"] = f.name();
    switch (f.kind()) {
        case exchange::CdfFamily::Kind::Uniform:
            j["low"] = f.param_a();
            j["high"] = f.param_b();
            break;
        case exchange::CdfFamily::Kind::Exponential:
            j["rate"] = f.param_a();
            break;
        case exchange::CdfFamily::Kind::LogNormal:
            j["log_mean"] = f.param_a();
            j["log_sd"] = f.param_b();
            break;
    }
    return j;
}

inline exchange::BidModel bid_model_from_json(const json& j) {
    std::string variant = j.at("variant").get<std::string>();
    if (variant == "null") return exchange::BidModel::null_exchange();
    if (variant == "single_bidder")
        return exchange::BidModel::single_bidder(family_from_json(j));
    if (variant == "second_price")
        return exchange::BidModel::second_price(family_from_json(j),
                                                j.at("bidders").get<int>());
    if (variant == "empirical") {
        std::vector<exchange::BidSample> samples;
        if (j.contains("bids_csv")) {
            std::ifstream f(j.at("bids_csv").get<std::string>());
            if (!f) throw ConfigError("cannot open bids_csv");
            samples = read_bid_csv(f);
        } else {
            for (const auto& row : j.at("samples"))
                samples.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
        }
        return exchange::BidModel::empirical(std::move(samples));
    }
    throw ConfigError("unknown exchange variant: " + variant);
}

inline json bid_model_to_json(const exchange::BidModel& m) {
    json j;
    switch (m.kind()) {
        case exchange::BidModel::Kind::NullExchange:
            j["variant"] = "null";
            break;
        case exchange::BidModel::Kind::SingleBidder:
            j = family_to_json(m.family());
            j["variant"] = "single_bidder";
            break;
        case exchange::BidModel::Kind::SecondPrice:
            j = family_to_json(m.family());
            j["variant"] = "second_price";
            j["bidders"] = m.bidders();
            break;
        case exchange::BidModel::Kind::Empirical: {
            j["variant"] = "empirical";
            json rows = json::array();
            for (const auto& s : m.samples()) rows.push_back({s.highest, s.second_highest});
            j["samples"] = rows;
            break;
        }
    }
    return j;
}

inline MarketModel model_from_json(const json& j) {
    std::vector<Advertiser> advs;
    for (const auto& ja : j.at("advertisers")) {
        Advertiser a;
        a.id = ja.at("id").get<std::string>();
        a.rho = ja.at("rho").get<double>();
        a.penalty = ja.value("penalty", 0.0);
        if (ja.contains("quality_floor")) a.quality_floor = ja.at("quality_floor").get<double>();
        advs.push_back(std::move(a));
    }
    auto index_of = [&](const std::string& id) {
        for (std::size_t i = 0; i < advs.size(); ++i)
            if (advs[i].id == id) return static_cast<int>(i);
        throw ConfigError("type references unknown advertiser: " + id);
    };
    std::vector<UserType> types;
    for (const auto& jt : j.at("types")) {
        UserType t;
        for (const auto& m : jt.at("members")) t.members.push_back(index_of(m.get<std::string>()));
        std::sort(t.members.begin(), t.members.end());
        t.probability = jt.at("probability").get<double>();
        for (const auto& v : jt.at("log_mean")) t.log_mean.push_back(v.get<double>());
        for (const auto& row : jt.at("log_cov"))
            for (const auto& v : row) t.log_cov.push_back(v.get<double>());
        types.push_back(std::move(t));
    }
    double gamma = j.value("gamma", 1.0);
    exchange::BidModel bids = j.contains("exchange") ? bid_model_from_json(j.at("exchange"))
                                                     : exchange::BidModel::null_exchange();
    return MarketModel(std::move(advs), std::move(types), gamma, std::move(bids));
}

inline json model_to_json(const MarketModel& m) {
    json j;
    j["advertisers"] = json::array();
    for (const auto& a : m.advertisers()) {
        json ja{{"id", a.id}, {"rho", a.rho}, {"penalty", a.penalty}};
        if (a.quality_floor) ja["quality_floor"] = *a.quality_floor;
        j["advertisers"].push_back(ja);
    }
    j["types"] = json::array();
    for (const auto& t : m.types()) {
        json jt;
        jt["members"] = json::array();
        for (int mi : t.members) jt["members"].push_back(m.advertisers()[mi].id);
        jt["probability"] = t.probability;
        jt["log_mean"] = t.log_mean;
        std::size_t n = t.members.size();
        json cov = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            json row = json::array();
            for (std::size_t k = 0; k < n; ++k) row.push_back(t.log_cov[i * n + k]);
            cov.push_back(row);
        }
        jt["log_cov"] = cov;
        j["types"].push_back(jt);
    }
    j["gamma"] = m.gamma();
    j["exchange"] = bid_model_to_json(m.bids());
    return j;
}

inline MarketModel load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open model config: " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("model config parse error: ") + e.what());
    }
    return model_from_json(j);
}

// Sample log: header = advertiser ids; empty cell = advertiser not in type.
inline void write_sample_csv(std::ostream& os, const MarketModel& m,
                             const std::vector<QualityVector>& samples) {
    const auto& advs = m.advertisers();
    for (std::size_t a = 0; a < advs.size(); ++a)
        os << advs[a].id << (a + 1 < advs.size() ? ',' : '\n');
    for (const auto& q : samples) {
        for (std::size_t a = 0; a < advs.size(); ++a) {
            if (q.values[a] > 0.0) os << q.values[a];
            os << (a + 1 < advs.size() ? ',' : '\n');
        }
    }
}

inline std::vector<MixtureSample> read_sample_csv(std::istream& is,
                                                  std::vector<std::string>* header_ids = nullptr) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty sample log");
    if (header_ids) {
        header_ids->clear();
        std::istringstream hs(line);
        std::string id;
        while (std::getline(hs, id, ',')) header_ids->push_back(id);
    }
    std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    std::vector<MixtureSample> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        MixtureSample s;
        std::istringstream ls(line);
        std::string cell;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!std::getline(ls, cell, ',')) cell.clear();
            if (!cell.empty()) {
                s.members.push_back(static_cast<int>(c));
                s.qualities.push_back(std::stod(cell));
            }
        }
        out.push_back(std::move(s));
    }
    if (out.empty()) throw ConfigError("sample log has no rows");
    return out;
}

} // namespace adx::market
