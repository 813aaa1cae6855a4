#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsim/diag.hpp"
#include "fsim/format.hpp"
#include "fsim/runtime.hpp"

namespace fsim {

// Tabular agent over discretized state observations. Numeric variables are
// binned uniformly; finite ones pass through. The score variable and the
// terminated flag stay out of the observation so the agent cannot key its
// policy to its own reward tally.

inline std::vector<int> discretize(const FactoredPOMDP& p, const std::vector<Value>& values,
                                   int bins) {
    std::vector<int> obs;
    int term = find_terminated_var(p);
    for (std::size_t i = 0; i < p.variables.size(); ++i) {
        if (static_cast<int>(i) == p.score_index || static_cast<int>(i) == term) continue;
        const Domain& d = p.variables[i].domain;
        auto bin_real = [&](double x) {
            if (d.hi <= d.lo) return 0;
            double t = (x - d.lo) / (d.hi - d.lo);
            int b = static_cast<int>(t * bins);
            return std::clamp(b, 0, bins - 1);
        };
        switch (d.kind) {
            case DomainKind::Bool:
                obs.push_back(values[i].num != 0 ? 1 : 0);
                break;
            case DomainKind::Enum:
                obs.push_back(static_cast<int>(values[i].num));
                break;
            case DomainKind::Int: {
                long long card = static_cast<long long>(d.hi) - static_cast<long long>(d.lo) + 1;
                if (card <= bins)
                    obs.push_back(static_cast<int>(values[i].num - d.lo));
                else
                    obs.push_back(bin_real(values[i].num));
                break;
            }
            case DomainKind::Real:
                obs.push_back(bin_real(values[i].num));
                break;
            case DomainKind::Vec:
                for (double x : values[i].vec) obs.push_back(bin_real(x));
                break;
        }
    }
    return obs;
}

struct Hyperparams {
    double alpha = 0.1;
    double gamma = 0.99;           // training discount
    double eps_start = 1.0;
    double eps_end = 0.05;         // linear anneal over the first half of training
    long long total_steps = 200000;
    int bins = 8;
};

struct TabularPolicy {
    std::vector<std::string> actions;
    Hyperparams hp;
    std::map<std::vector<int>, std::vector<double>> q;

    std::vector<double>& row(const std::vector<int>& obs) {
        auto it = q.find(obs);
        if (it == q.end())
            it = q.emplace(obs, std::vector<double>(actions.size(), 0.0)).first;
        return it->second;
    }
    const std::vector<double>* row_if(const std::vector<int>& obs) const {
        auto it = q.find(obs);
        return it == q.end() ? nullptr : &it->second;
    }
    // First maximum in action-token order, so ties break deterministically.
    int greedy(const std::vector<int>& obs) const {
        const std::vector<double>* r = row_if(obs);
        if (!r) return 0;
        int best = 0;
        for (std::size_t a = 1; a < r->size(); ++a)
            if ((*r)[a] > (*r)[best]) best = static_cast<int>(a);
        return best;
    }
};

struct EpisodePoint {
    long long step = 0;
    double episode_return = 0;
};

struct TrainResult {
    TabularPolicy policy;
    std::vector<EpisodePoint> curve;  // one point per completed episode
};

inline void require_same_actions(const std::vector<FactoredPOMDP>& programs) {
    for (std::size_t i = 1; i < programs.size(); ++i)
        if (programs[i].actions != programs[0].actions)
            throw SimError(DiagCode::IncompatibleActionSets,
                           "program " + std::to_string(i) +
                               " declares different action tokens than program 0");
}

// Q-learning with round-robin environment sampling. Episode ends by step cap
// bootstrap normally (truncation), true termination drops the bootstrap.
inline TrainResult train(const std::vector<FactoredPOMDP>& programs, const Hyperparams& hp,
                         std::uint64_t seed) {
    if (programs.empty())
        throw SimError(DiagCode::EmptySpec, "training needs at least one program");
    require_same_actions(programs);

    TrainResult out;
    out.policy.actions = programs[0].actions;
    out.policy.hp = hp;
    TabularPolicy& pol = out.policy;

    Rng explore(stream_seed(seed, "train/explore"));
    long long global_step = 0;
    long long episode = 0;
    long long anneal_steps = std::max<long long>(1, hp.total_steps / 2);

    while (global_step < hp.total_steps) {
        const FactoredPOMDP& p = programs[episode % programs.size()];
        std::uint64_t ep_seed = stream_seed(seed, "train/ep/" + std::to_string(episode));
        StreamRouter router(ep_seed);
        SimState state = reset_state(p, ep_seed);
        std::vector<int> obs = discretize(p, state.values, hp.bins);
        double ep_return = 0;
        bool done = state.terminated;

        while (!done && global_step < hp.total_steps) {
            double frac = std::min(1.0, static_cast<double>(global_step) /
                                            static_cast<double>(anneal_steps));
            double eps = hp.eps_start + frac * (hp.eps_end - hp.eps_start);
            int a = explore.next_unit() < eps
                        ? static_cast<int>(explore.below(pol.actions.size()))
                        : pol.greedy(obs);
            StepResult sr = step(p, state, pol.actions[static_cast<std::size_t>(a)], router);
            state = sr.state;
            ep_return += sr.reward;
            ++global_step;

            std::vector<int> next_obs = discretize(p, state.values, hp.bins);
            double target = sr.reward;
            if (!state.terminated) {
                double best = 0;  // an unseen successor row is all zeros
                if (const std::vector<double>* next_row = pol.row_if(next_obs)) {
                    best = (*next_row)[0];
                    for (double v : *next_row) best = std::max(best, v);
                }
                target += hp.gamma * best;
            }
            std::vector<double>& row = pol.row(obs);
            row[static_cast<std::size_t>(a)] +=
                hp.alpha * (target - row[static_cast<std::size_t>(a)]);
            obs = std::move(next_obs);
            done = sr.done;
        }
        out.curve.push_back({global_step, ep_return});
        ++episode;
    }
    return out;
}

// Greedy rollouts; one return per episode.
inline std::vector<double> evaluate_greedy(const FactoredPOMDP& p, const TabularPolicy& pol,
                                           int episodes, std::uint64_t seed) {
    std::vector<double> returns;
    for (int e = 0; e < episodes; ++e) {
        std::uint64_t ep_seed = stream_seed(seed, "eval/ep/" + std::to_string(e));
        StreamRouter router(ep_seed);
        SimState state = reset_state(p, ep_seed);
        double total = 0;
        bool done = state.terminated;
        while (!done) {
            int a = pol.greedy(discretize(p, state.values, pol.hp.bins));
            StepResult sr = step(p, state, pol.actions[static_cast<std::size_t>(a)], router);
            state = sr.state;
            total += sr.reward;
            done = sr.done;
        }
        returns.push_back(total);
    }
    return returns;
}

inline std::vector<double> evaluate_random(const FactoredPOMDP& p, int episodes,
                                           std::uint64_t seed, const std::string& purpose) {
    std::vector<double> returns;
    Rng rng(stream_seed(seed, purpose));
    for (int e = 0; e < episodes; ++e) {
        std::uint64_t ep_seed = stream_seed(seed, "eval/ep/" + std::to_string(e));
        StreamRouter router(ep_seed);
        SimState state = reset_state(p, ep_seed);
        double total = 0;
        bool done = state.terminated;
        while (!done) {
            int a = static_cast<int>(rng.below(p.actions.size()));
            StepResult sr = step(p, state, p.actions[static_cast<std::size_t>(a)], router);
            state = sr.state;
            total += sr.reward;
            done = sr.done;
        }
        returns.push_back(total);
    }
    return returns;
}

inline double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0;
    double s = 0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double stderr_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0;
    double m = mean_of(xs);
    double ss = 0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / (static_cast<double>(xs.size()) - 1) /
                     static_cast<double>(xs.size()));
}

struct TransferReport {
    double raw_mean = 0;
    double raw_stderr = 0;
    double random_mean = 0;
    double reference_mean = 0;
    double normalized = 0;
    double normalized_stderr = 0;
    bool degenerate = false;
    int episodes = 0;
    std::vector<std::uint64_t> seeds;
};

// Normalized zero-shot score: 0 = random policy, 1 = a policy trained on the
// reference itself. Endpoints are measured on the same seeds as the
// candidate.
inline TransferReport evaluate_zero_shot(const TabularPolicy& policy,
                                         const FactoredPOMDP& reference,
                                         const TabularPolicy& reference_policy, int episodes,
                                         const std::vector<std::uint64_t>& seeds) {
    TransferReport rep;
    rep.episodes = episodes;
    rep.seeds = seeds;
    std::vector<double> raw, random_returns, ref_returns;
    for (std::uint64_t s : seeds) {
        auto a = evaluate_greedy(reference, policy, episodes, s);
        raw.insert(raw.end(), a.begin(), a.end());
        auto b = evaluate_random(reference, episodes, s, "eval/random-baseline");
        random_returns.insert(random_returns.end(), b.begin(), b.end());
        auto c = evaluate_greedy(reference, reference_policy, episodes, s);
        ref_returns.insert(ref_returns.end(), c.begin(), c.end());
    }
    rep.raw_mean = mean_of(raw);
    rep.raw_stderr = stderr_of(raw);
    rep.random_mean = mean_of(random_returns);
    rep.reference_mean = mean_of(ref_returns);
    double span = rep.reference_mean - rep.random_mean;
    if (span <= 0) {
        rep.degenerate = true;
        return rep;
    }
    rep.normalized = (rep.raw_mean - rep.random_mean) / span;
    rep.normalized_stderr = rep.raw_stderr / span;
    return rep;
}

inline nlohmann::ordered_json transfer_report_to_json(const TransferReport& r) {
    nlohmann::ordered_json j;
    j["raw_mean"] = r.raw_mean;
    j["raw_stderr"] = r.raw_stderr;
    j["random_mean"] = r.random_mean;
    j["reference_mean"] = r.reference_mean;
    j["normalized"] = r.normalized;
    j["normalized_stderr"] = r.normalized_stderr;
    j["degenerate"] = r.degenerate;
    j["episodes"] = r.episodes;
    j["seeds"] = r.seeds;
    return j;
}

inline std::string render_transfer_report(const TransferReport& r) {
    std::ostringstream out;
    out << "raw mean return      " << format_number(r.raw_mean) << " +/- "
        << format_number(r.raw_stderr) << "\n";
    out << "random baseline      " << format_number(r.random_mean) << "\n";
    out << "reference baseline   " << format_number(r.reference_mean) << "\n";
    if (r.degenerate)
        out << "normalized           degenerate (reference <= random)\n";
    else
        out << "normalized           " << format_number(r.normalized) << " +/- "
            << format_number(r.normalized_stderr) << "\n";
    out << "episodes per seed    " << r.episodes << ", seeds";
    for (auto s : r.seeds) out << " " << s;
    out << "\n";
    return out.str();
}

// CSV of the training curve: global step and the trailing-100-episode mean.
inline std::string train_curve_csv(const TrainResult& tr) {
    std::ostringstream out;
    out << "step,mean_return\n";
    double window_sum = 0;
    std::vector<double> window;
    for (const auto& pt : tr.curve) {
        window.push_back(pt.episode_return);
        window_sum += pt.episode_return;
        if (window.size() > 100) {
            window_sum -= window[window.size() - 101];
        }
        double denom = std::min<std::size_t>(window.size(), 100);
        out << pt.step << "," << format_number(window_sum / denom) << "\n";
    }
    return out.str();
}

inline nlohmann::ordered_json policy_to_json(const TabularPolicy& pol) {
    nlohmann::ordered_json j;
    j["actions"] = pol.actions;
    j["hp"]["alpha"] = pol.hp.alpha;
    j["hp"]["gamma"] = pol.hp.gamma;
    j["hp"]["eps_start"] = pol.hp.eps_start;
    j["hp"]["eps_end"] = pol.hp.eps_end;
    j["hp"]["total_steps"] = pol.hp.total_steps;
    j["hp"]["bins"] = pol.hp.bins;
    j["q"] = nlohmann::ordered_json::array();
    for (const auto& [obs, values] : pol.q) {
        nlohmann::ordered_json row;
        row["obs"] = obs;
        row["values"] = values;
        j["q"].push_back(std::move(row));
    }
    return j;
}

inline TabularPolicy policy_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("actions") || !j.contains("q"))
        throw SimError(DiagCode::SchemaError, "policy file must carry actions and q");
    TabularPolicy pol;
    pol.actions = j["actions"].get<std::vector<std::string>>();
    if (j.contains("hp")) {
        const auto& h = j["hp"];
        pol.hp.alpha = h.value("alpha", pol.hp.alpha);
        pol.hp.gamma = h.value("gamma", pol.hp.gamma);
        pol.hp.eps_start = h.value("eps_start", pol.hp.eps_start);
        pol.hp.eps_end = h.value("eps_end", pol.hp.eps_end);
        pol.hp.total_steps = h.value("total_steps", pol.hp.total_steps);
        pol.hp.bins = h.value("bins", pol.hp.bins);
    }
    for (const auto& row : j["q"]) {
        std::vector<int> obs = row["obs"].get<std::vector<int>>();
        std::vector<double> values = row["values"].get<std::vector<double>>();
        if (values.size() != pol.actions.size())
            throw SimError(DiagCode::SchemaError, "policy row width does not match actions");
        pol.q.emplace(std::move(obs), std::move(values));
    }
    return pol;
}

// Keeps programs a random policy can run for `steps` steps on every seed
// without an interpreter fault. Clamp warnings do not reject.
struct FilterResult {
    std::vector<std::size_t> kept;
    std::vector<std::pair<std::size_t, std::string>> rejected;
};

inline FilterResult filter_envs(const std::vector<FactoredPOMDP>& programs,
                                const std::vector<std::uint64_t>& seeds, long long steps) {
    FilterResult out;
    for (std::size_t i = 0; i < programs.size(); ++i) {
        const FactoredPOMDP& p = programs[i];
        std::string error;
        for (std::uint64_t seed : seeds) {
            try {
                Rng rng(stream_seed(seed, "filter/policy"));
                long long remaining = steps;
                long long episode = 0;
                while (remaining > 0) {
                    std::uint64_t ep_seed =
                        stream_seed(seed, "filter/ep/" + std::to_string(episode));
                    StreamRouter router(ep_seed);
                    SimState state = reset_state(p, ep_seed);
                    bool done = state.terminated;
                    long long before = remaining;
                    while (!done && remaining > 0) {
                        int a = static_cast<int>(rng.below(p.actions.size()));
                        StepResult sr =
                            step(p, state, p.actions[static_cast<std::size_t>(a)], router);
                        state = sr.state;
                        done = sr.done;
                        --remaining;
                    }
                    ++episode;
                    if (remaining == before)
                        throw SimError(DiagCode::SteppedAfterDone,
                                       "episodes terminate before any step can run");
                }
            } catch (const SimError& e) {
                error = std::string(to_string(e.code())) + ": " + e.what();
                break;
            }
        }
        if (error.empty())
            out.kept.push_back(i);
        else
            out.rejected.emplace_back(i, error);
    }
    return out;
}

}  // namespace fsim
