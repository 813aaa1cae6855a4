#pragma once

#include <map>
#include <string>
#include <vector>

#include "fsim/eval.hpp"
#include "fsim/ir.hpp"
#include "fsim/runtime.hpp"

namespace fsim {

// ---------------------------------------------------------------------------
// Exhaustive choice enumeration. EnumChoice drives the ordinary interpreter
// down every random branch in depth-first order: each run replays a forced
// prefix, first-choice-extends; advance() moves to the next leaf.

class EnumChoice : public ChoiceSource {
public:
    static constexpr std::size_t kMaxPathsDefault = 1 << 16;

    void begin_run() {
        cursor_ = 0;
        prob_ = 1.0;
    }

    double path_prob() const { return prob_; }

    // Steps the odometer; false once every path has been visited.
    bool advance() {
        path_.resize(cursor_);  // drop nodes beyond the last replayed/created one
        while (!path_.empty()) {
            Node& last = path_.back();
            if (last.pick + 1 < last.n) {
                ++last.pick;
                return true;
            }
            path_.pop_back();
        }
        return false;
    }

    bool bernoulli(double p) override {
        int pick = take(2);
        prob_ *= pick == 0 ? p : 1.0 - p;
        return pick == 0;
    }

    long long uniform_int(long long a, long long b) override {
        long long n = b - a + 1;
        if (n > (1 << 20))
            throw SimError(DiagCode::CapExceeded, "uniform_int range too large to enumerate");
        int pick = take(static_cast<int>(n));
        prob_ *= 1.0 / static_cast<double>(n);
        return a + pick;
    }

    double uniform_real(double, double) override {
        throw SimError(DiagCode::NotFinite,
                       "uniform_real draws cannot be enumerated exactly");
    }

    int categorical(const std::vector<double>& weights) override {
        double total = 0;
        for (double w : weights) total += w;
        int pick = take(static_cast<int>(weights.size()));
        prob_ *= weights[static_cast<std::size_t>(pick)] / total;
        return pick;
    }

private:
    struct Node {
        int pick = 0;
        int n = 1;
    };

    int take(int n) {
        if (cursor_ < path_.size()) {
            int pick = path_[cursor_].pick;
            ++cursor_;
            return pick;
        }
        path_.push_back({0, n});
        ++cursor_;
        return 0;
    }

    std::vector<Node> path_;
    std::size_t cursor_ = 0;
    double prob_ = 1.0;
};

// ---------------------------------------------------------------------------
// Joint state indexing for finite POMDPs: mixed radix, first variable most
// significant.

inline void require_finite(const FactoredPOMDP& p) {
    for (const auto& v : p.variables)
        if (!v.domain.finite())
            throw SimError(DiagCode::NotFinite,
                           "variable '" + v.id + "' has an unbounded or continuous domain");
}

inline long long joint_state_count(const FactoredPOMDP& p) {
    long long n = 1;
    for (const auto& v : p.variables) {
        n *= v.domain.cardinality();
        if (n < 0) return -1;
    }
    return n;
}

inline long long state_to_index(const FactoredPOMDP& p, const std::vector<Value>& vals) {
    long long idx = 0;
    for (std::size_t i = 0; i < p.variables.size(); ++i) {
        const Domain& d = p.variables[i].domain;
        idx = idx * d.cardinality() + domain_ord(d, vals[i].num);
    }
    return idx;
}

inline std::vector<Value> index_to_state(const FactoredPOMDP& p, long long idx) {
    std::vector<Value> vals(p.variables.size());
    for (std::size_t i = p.variables.size(); i-- > 0;) {
        const Domain& d = p.variables[i].domain;
        long long c = d.cardinality();
        vals[i].num = domain_nth(d, idx % c);
        idx /= c;
    }
    return vals;
}

// Sparse distribution over joint state indices.
using StateDist = std::map<long long, double>;

struct JointTable {
    long long n_states = 0;
    std::vector<std::string> actions;
    std::vector<StateDist> rows;  // index = state * actions.size() + action

    const StateDist& row(long long state, std::size_t action) const {
        return rows[static_cast<std::size_t>(state) * actions.size() + action];
    }
};

namespace detail {

// Enumerates one factor body from one concrete assignment; returns the exact
// distribution over resulting assignments.
inline std::map<std::vector<double>, double> enumerate_factor(const FactoredPOMDP& p,
                                                              const Factor& f, int action,
                                                              const std::vector<double>& start,
                                                              std::size_t max_paths) {
    std::map<std::vector<double>, double> out;
    EnumChoice choice;
    std::size_t paths = 0;
    do {
        choice.begin_run();
        std::vector<Value> vals(start.size());
        for (std::size_t i = 0; i < start.size(); ++i) vals[i].num = start[i];
        EvalCtx ctx{p, vals, choice, -1, {}, nullptr, nullptr};
        exec_factor(ctx, f, action);
        std::vector<double> result(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) result[i] = vals[i].num;
        out[result] += choice.path_prob();
        if (++paths > max_paths)
            throw SimError(DiagCode::CapExceeded, "factor '" + f.id +
                                                      "' has too many random branches to enumerate");
    } while (choice.advance());
    return out;
}

}  // namespace detail

// Materializes the exact joint transition table by composing each factor's
// enumerated kernel in evaluation order. Factors read only their scope and
// write only their targets, so the composed table is the factored transition
// product evaluated without sampling.
inline JointTable flatten_enumerate(const FactoredPOMDP& p, long long cap = 100000,
                                    std::size_t max_paths = EnumChoice::kMaxPathsDefault) {
    require_finite(p);
    long long n_states = joint_state_count(p);
    auto n_actions = static_cast<long long>(p.actions.size());
    if (n_states < 0 || n_states * n_actions > cap)
        throw SimError(DiagCode::CapExceeded,
                       "joint table needs " +
                           (n_states < 0 ? std::string("over 2^62")
                                         : std::to_string(n_states * n_actions)) +
                           " entries; cap is " + std::to_string(cap));

    JointTable table;
    table.n_states = n_states;
    table.actions = p.actions;
    table.rows.resize(static_cast<std::size_t>(n_states * n_actions));

    for (long long s = 0; s < n_states; ++s) {
        std::vector<Value> start = index_to_state(p, s);
        std::vector<double> start_nums(start.size());
        for (std::size_t i = 0; i < start.size(); ++i) start_nums[i] = start[i].num;
        for (long long a = 0; a < n_actions; ++a) {
            std::map<std::vector<double>, double> dist;
            dist[start_nums] = 1.0;
            for (const auto& f : p.factors) {
                if (f.kind == FactorKind::View) continue;  // views write nothing
                std::map<std::vector<double>, double> next;
                for (const auto& [assign, prob] : dist) {
                    auto kernel = detail::enumerate_factor(p, f, static_cast<int>(a), assign,
                                                           max_paths);
                    for (const auto& [result, kp] : kernel) next[result] += prob * kp;
                }
                dist = std::move(next);
            }
            StateDist& row = table.rows[static_cast<std::size_t>(s * n_actions + a)];
            for (const auto& [assign, prob] : dist) {
                std::vector<Value> vals(assign.size());
                for (std::size_t i = 0; i < assign.size(); ++i) vals[i].num = assign[i];
                row[state_to_index(p, vals)] += prob;
            }
        }
    }
    return table;
}

// Exact next-state distribution of one (state, action) pair computed by
// driving the real step() down every random branch. Independent of
// flatten_enumerate's per-factor composition, so the two serve as mutual
// oracles.
inline StateDist step_distribution(const FactoredPOMDP& p, const std::vector<Value>& values,
                                   const std::string& action,
                                   std::size_t max_paths = EnumChoice::kMaxPathsDefault) {
    require_finite(p);
    StateDist out;
    EnumChoice choice;
    SingleSourceRouter router(choice);
    std::size_t paths = 0;
    do {
        choice.begin_run();
        SimState st;
        st.values = values;
        StepResult r = step(p, st, action, router);
        out[state_to_index(p, r.state.values)] += choice.path_prob();
        if (++paths > max_paths)
            throw SimError(DiagCode::CapExceeded, "too many random branches to enumerate");
    } while (choice.advance());
    return out;
}

}  // namespace fsim
