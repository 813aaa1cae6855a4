#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "fsim/ir.hpp"
#include "fsim/runtime.hpp"

namespace fsim {

// Episode trace as one JSON document: a record per step with the full state
// assignment, the action, the reward, the done flag, and the emitted shapes.

inline nlohmann::ordered_json value_to_json(const Domain& d, const Value& v) {
    switch (d.kind) {
        case DomainKind::Bool: return v.num != 0;
        case DomainKind::Enum: {
            auto idx = static_cast<std::size_t>(v.num);
            if (idx < d.labels.size()) return d.labels[idx];
            return v.num;
        }
        case DomainKind::Vec: {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (double x : v.vec) arr.push_back(x);
            return arr;
        }
        default: return v.num;
    }
}

inline nlohmann::ordered_json state_to_json(const FactoredPOMDP& p,
                                            const std::vector<Value>& values) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < p.variables.size(); ++i)
        j[p.variables[i].id] = value_to_json(p.variables[i].domain, values[i]);
    return j;
}

inline nlohmann::ordered_json shape_to_json(const Shape& s) {
    nlohmann::ordered_json j;
    switch (s.kind) {
        case ShapeKind::Rect:
            j["kind"] = "rect";
            j["x"] = s.x;
            j["y"] = s.y;
            j["w"] = s.w;
            j["h"] = s.h;
            break;
        case ShapeKind::Circle:
            j["kind"] = "circle";
            j["x"] = s.x;
            j["y"] = s.y;
            j["r"] = s.r;
            break;
        case ShapeKind::Text:
            j["kind"] = "text";
            j["x"] = s.x;
            j["y"] = s.y;
            j["text"] = s.text;
            break;
    }
    j["color"] = palette_names()[static_cast<std::size_t>(s.color)];
    return j;
}

inline nlohmann::ordered_json shapes_to_json(const std::vector<Shape>& shapes) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : shapes) arr.push_back(shape_to_json(s));
    return arr;
}

inline nlohmann::ordered_json trace_to_json(const FactoredPOMDP& p, const EpisodeTrace& t) {
    nlohmann::ordered_json j;
    j["initial_state"] = state_to_json(p, t.initial_state.values);
    j["initial_shapes"] = shapes_to_json(t.initial_observation.shapes);
    j["steps"] = nlohmann::ordered_json::array();
    for (const auto& es : t.steps) {
        nlohmann::ordered_json sj;
        sj["action"] = es.action;
        sj["reward"] = es.result.reward;
        sj["done"] = es.result.done;
        sj["state"] = state_to_json(p, es.result.state.values);
        sj["shapes"] = shapes_to_json(es.result.observation.shapes);
        j["steps"].push_back(std::move(sj));
    }
    j["cumulative_reward"] = t.cumulative_reward;
    j["warnings"] = nlohmann::ordered_json::array();
    for (const auto& w : t.warnings) j["warnings"].push_back(w.render());
    return j;
}

}  // namespace fsim
