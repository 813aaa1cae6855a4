#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fsim/eval.hpp"
#include "fsim/ir.hpp"
#include "fsim/rng.hpp"

namespace fsim {

struct SimState {
    std::vector<Value> values;  // parallel to pomdp.variables
    long long step_count = 0;
    bool terminated = false;
};

struct Observation {
    std::vector<Shape> shapes;
};

struct StepResult {
    SimState state;
    Observation observation;
    double reward = 0;
    bool done = false;
};

// ---------------------------------------------------------------------------
// Randomness routing. Every factor draws from its own named stream derived
// from the root seed, so adding or editing one factor leaves every other
// factor's draws untouched. Tests inject routers that force or record the
// choices instead.

class ChoiceRouter {
public:
    virtual ~ChoiceRouter() = default;
    virtual ChoiceSource& source_for(const std::string& factor_id) = 0;
};

class StreamRouter : public ChoiceRouter {
public:
    explicit StreamRouter(std::uint64_t root_seed) : root_(root_seed) {}

    ChoiceSource& source_for(const std::string& factor_id) override {
        auto it = streams_.find(factor_id);
        if (it == streams_.end())
            it = streams_
                     .emplace(factor_id, StreamChoice(stream_seed(root_, "factor/" + factor_id)))
                     .first;
        return it->second;
    }

private:
    std::uint64_t root_;
    std::map<std::string, StreamChoice> streams_;
};

// Routes every factor to one shared source; used by oracles that enumerate
// or force the whole step's choice sequence.
class SingleSourceRouter : public ChoiceRouter {
public:
    explicit SingleSourceRouter(ChoiceSource& src) : src_(src) {}
    ChoiceSource& source_for(const std::string&) override { return src_; }

private:
    ChoiceSource& src_;
};

// ---------------------------------------------------------------------------

inline int find_terminated_var(const FactoredPOMDP& p) {
    int idx = variable_index(p, "terminated");
    if (idx >= 0 && p.variables[static_cast<std::size_t>(idx)].domain.kind == DomainKind::Bool)
        return idx;
    return -1;
}

// Samples every variable's init distribution from its own seed-derived
// stream.
inline SimState reset_state(const FactoredPOMDP& p, std::uint64_t seed,
                            std::vector<Diagnostic>* warnings = nullptr) {
    SimState st;
    st.values.resize(p.variables.size());
    for (std::size_t i = 0; i < p.variables.size(); ++i) {
        const StateVariable& v = p.variables[i];
        Value& out = st.values[i];
        if (v.domain.kind == DomainKind::Vec)
            out.vec.assign(static_cast<std::size_t>(v.domain.size), 0.0);
        StreamChoice choice(stream_seed(seed, "init/" + v.id));
        switch (v.init.kind) {
            case InitKind::Point:
                if (v.domain.kind == DomainKind::Vec)
                    out.vec = v.init.point.vec;
                else
                    out.num = v.init.point.num;
                break;
            case InitKind::Uniform:
                switch (v.domain.kind) {
                    case DomainKind::Bool: out.num = static_cast<double>(choice.uniform_int(0, 1)); break;
                    case DomainKind::Int:
                        out.num = static_cast<double>(choice.uniform_int(
                            static_cast<long long>(v.domain.lo),
                            static_cast<long long>(v.domain.hi)));
                        break;
                    case DomainKind::Real: out.num = choice.uniform_real(v.domain.lo, v.domain.hi); break;
                    case DomainKind::Enum:
                        out.num = static_cast<double>(choice.uniform_int(
                            0, static_cast<long long>(v.domain.labels.size()) - 1));
                        break;
                    case DomainKind::Vec:
                        for (auto& cell : out.vec)
                            cell = choice.uniform_real(v.domain.lo, v.domain.hi);
                        break;
                }
                break;
            case InitKind::Categorical: {
                int k = choice.categorical(v.init.weights);
                out.num = v.init.values[static_cast<std::size_t>(k)];
                break;
            }
        }
    }
    int term = find_terminated_var(p);
    if (term >= 0) st.terminated = st.values[static_cast<std::size_t>(term)].num != 0;
    (void)warnings;
    return st;
}

// Runs the view factors over a state, collecting shapes.
inline Observation observe(const FactoredPOMDP& p, const SimState& st, ChoiceRouter& router,
                           std::vector<Diagnostic>* warnings = nullptr) {
    Observation obs;
    std::vector<Value> scratch = st.values;  // views cannot write, but stay safe
    for (const auto& f : p.factors) {
        if (f.kind != FactorKind::View) continue;
        EvalCtx fctx{p, scratch, router.source_for(f.id), -1, {}, &obs.shapes, warnings};
        exec_block(fctx, f.body);
    }
    return obs;
}

inline std::pair<SimState, Observation> reset(const FactoredPOMDP& p, std::uint64_t seed,
                                              ChoiceRouter& router,
                                              std::vector<Diagnostic>* warnings = nullptr) {
    SimState st = reset_state(p, seed, warnings);
    Observation obs = observe(p, st, router, warnings);
    return {std::move(st), std::move(obs)};
}

// One step: controller factors, model factors, reward increments, then view
// rendering, in the stored total order. Reward is the score delta.
inline StepResult step(const FactoredPOMDP& p, const SimState& state, const std::string& action,
                       ChoiceRouter& router, std::vector<Diagnostic>* warnings = nullptr) {
    if (state.terminated || state.step_count >= p.max_steps)
        throw SimError(DiagCode::SteppedAfterDone, "episode is already over");
    int act = action_index(p, action);
    if (act < 0) throw SimError(DiagCode::UnknownAction, "unknown action token '" + action + "'");

    StepResult r;
    r.state.values = state.values;
    r.state.step_count = state.step_count + 1;

    double score_before =
        p.score_index >= 0 ? r.state.values[static_cast<std::size_t>(p.score_index)].num : 0;

    for (const auto& f : p.factors) {
        EvalCtx ctx{p,
                    r.state.values,
                    router.source_for(f.id),
                    -1,
                    {},
                    f.kind == FactorKind::View ? &r.observation.shapes : nullptr,
                    warnings};
        exec_factor(ctx, f, act);
    }

    double score_after =
        p.score_index >= 0 ? r.state.values[static_cast<std::size_t>(p.score_index)].num : 0;
    r.reward = score_after - score_before;

    int term = find_terminated_var(p);
    r.state.terminated =
        term >= 0 && r.state.values[static_cast<std::size_t>(term)].num != 0;
    r.done = r.state.terminated || r.state.step_count >= p.max_steps;
    return r;
}

// ---------------------------------------------------------------------------
// Episode harness.

using Policy = std::function<std::string(const SimState&, const Observation&)>;

struct EpisodeStep {
    std::string action;
    StepResult result;
};

struct EpisodeTrace {
    SimState initial_state;
    Observation initial_observation;
    std::vector<EpisodeStep> steps;
    double cumulative_reward = 0;
    std::vector<Diagnostic> warnings;
};

inline EpisodeTrace run_episode(const FactoredPOMDP& p, const Policy& policy,
                                std::uint64_t seed) {
    EpisodeTrace trace;
    StreamRouter router(seed);
    auto [st, obs] = reset(p, seed, router, &trace.warnings);
    trace.initial_state = st;
    trace.initial_observation = obs;
    SimState cur = std::move(st);
    Observation cur_obs = std::move(obs);
    while (!cur.terminated && cur.step_count < p.max_steps) {
        std::string action = policy(cur, cur_obs);
        StepResult r = step(p, cur, action, router, &trace.warnings);
        cur = r.state;
        cur_obs = r.observation;
        trace.cumulative_reward += r.reward;
        trace.steps.push_back({std::move(action), std::move(r)});
    }
    return trace;
}

// Uniformly random action each step, from its own named stream.
inline Policy random_policy(const FactoredPOMDP& p, std::uint64_t seed) {
    auto rng = std::make_shared<Rng>(stream_seed(seed, "policy/random"));
    std::size_t n = p.actions.size();
    std::vector<std::string> actions = p.actions;
    return [rng, actions, n](const SimState&, const Observation&) {
        return actions[static_cast<std::size_t>(rng->below(n))];
    };
}

// ---------------------------------------------------------------------------
// Raster rendering: W x H grid of palette indices, painter's order.

struct Raster {
    int w = 0, h = 0;
    std::vector<std::uint8_t> cells;  // row-major palette indices

    std::uint8_t at(int x, int y) const {
        return cells[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                     static_cast<std::size_t>(x)];
    }
};

inline Raster render(const Observation& obs, int w = 64, int h = 64) {
    Raster r;
    r.w = w;
    r.h = h;
    r.cells.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
    auto put = [&](long long x, long long y, int color) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        r.cells[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(color & 15);
    };
    for (const auto& s : obs.shapes) {
        switch (s.kind) {
            case ShapeKind::Rect: {
                long long x0 = std::llround(s.x), y0 = std::llround(s.y);
                long long rw = std::llround(s.w), rh = std::llround(s.h);
                for (long long y = y0; y < y0 + rh; ++y)
                    for (long long x = x0; x < x0 + rw; ++x) put(x, y, s.color);
                break;
            }
            case ShapeKind::Circle: {
                long long x0 = std::llround(s.x - s.r), x1 = std::llround(s.x + s.r);
                long long y0 = std::llround(s.y - s.r), y1 = std::llround(s.y + s.r);
                for (long long y = y0; y <= y1; ++y)
                    for (long long x = x0; x <= x1; ++x) {
                        double dx = static_cast<double>(x) - s.x;
                        double dy = static_cast<double>(y) - s.y;
                        if (dx * dx + dy * dy <= s.r * s.r) put(x, y, s.color);
                    }
                break;
            }
            case ShapeKind::Text: {
                long long x0 = std::llround(s.x), y0 = std::llround(s.y);
                for (std::size_t i = 0; i < s.text.size(); ++i)
                    put(x0 + static_cast<long long>(i), y0, s.color);
                break;
            }
        }
    }
    return r;
}

}  // namespace fsim
