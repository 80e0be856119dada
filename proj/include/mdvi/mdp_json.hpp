#pragma once

#include "mdvi/mdp.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>

namespace mdvi {

/// Rows whose sum is off by at most this much are renormalized on load;
/// larger deviations are rejected.
inline constexpr double kLoadRenormalizeTolerance = 1e-9;

inline nlohmann::json to_json(const TabularMdp& mdp) {
    const std::size_t X = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    nlohmann::json rewards = nlohmann::json::array();
    nlohmann::json transitions = nlohmann::json::array();
    for (std::size_t x = 0; x < X; ++x) {
        nlohmann::json rrow = nlohmann::json::array();
        nlohmann::json trow = nlohmann::json::array();
        for (std::size_t a = 0; a < A; ++a) {
            rrow.push_back(mdp.rewards()(x, a));
            nlohmann::json dist = nlohmann::json::array();
            for (std::size_t y = 0; y < X; ++y) dist.push_back(mdp.transition(x, a, y));
            trow.push_back(std::move(dist));
        }
        rewards.push_back(std::move(rrow));
        transitions.push_back(std::move(trow));
    }
    return nlohmann::json{{"num_states", X},
                          {"num_actions", A},
                          {"discount", mdp.discount()},
                          {"rewards", std::move(rewards)},
                          {"transitions", std::move(transitions)}};
}

inline TabularMdp mdp_from_json(const nlohmann::json& doc) {
    try {
        const auto X = doc.at("num_states").get<std::size_t>();
        const auto A = doc.at("num_actions").get<std::size_t>();
        const auto gamma = doc.at("discount").get<double>();
        auto rewards = doc.at("rewards").get<std::vector<std::vector<double>>>();
        auto transitions = doc.at("transitions").get<std::vector<std::vector<std::vector<double>>>>();
        if (rewards.size() != X || transitions.size() != X)
            throw validation_error("MDP JSON: outer dimension does not match num_states");
        for (std::size_t x = 0; x < X; ++x) {
            if (rewards[x].size() != A || transitions[x].size() != A)
                throw validation_error("MDP JSON: action dimension does not match num_actions");
            for (auto& row : transitions[x]) {
                double sum = 0.0;
                for (double p : row) sum += p;
                const double off = std::abs(sum - 1.0);
                if (!(off <= kLoadRenormalizeTolerance))
                    throw validation_error("MDP JSON: transition row sums to " +
                                           std::to_string(sum) + ", off by more than 1e-9");
                if (off > 0.0) {
                    for (double& p : row) p /= sum;
                }
            }
        }
        return TabularMdp::from_nested(rewards, transitions, gamma);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("MDP JSON: ") + e.what());
    }
}

inline TabularMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open MDP file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("MDP file " + path + ": " + e.what());
    }
    return mdp_from_json(doc);
}

inline void save_mdp(const TabularMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("cannot write MDP file: " + path);
    out << to_json(mdp).dump(2) << '\n';
}

} // namespace mdvi
