#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsim/diag.hpp"
#include "fsim/format.hpp"
#include "fsim/runtime.hpp"

namespace fsim {

// Scripted action sequences with declarative checks: the executable form of a
// behavioral clause ("pressing LEFT three times moves the paddle to 4").

enum class TestStatus { Pass, Fail, Error };

inline const char* to_string(TestStatus s) {
    switch (s) {
        case TestStatus::Pass: return "PASS";
        case TestStatus::Fail: return "FAIL";
        case TestStatus::Error: return "ERROR";
    }
    return "?";
}

enum class AssertKind { Var, CumulativeReward, StepReward, Terminated, Shape };
enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

inline const char* to_string(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "=";
        case CmpOp::Ne: return "!=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
    }
    return "?";
}

inline bool parse_cmp_op(const std::string& s, CmpOp& out) {
    if (s == "=" || s == "==") out = CmpOp::Eq;
    else if (s == "!=") out = CmpOp::Ne;
    else if (s == "<") out = CmpOp::Lt;
    else if (s == "<=") out = CmpOp::Le;
    else if (s == ">") out = CmpOp::Gt;
    else if (s == ">=") out = CmpOp::Ge;
    else return false;
    return true;
}

struct ScriptEntry {
    std::string action;
    int repeat = 1;
};

struct SetupOverride {
    std::string var;
    nlohmann::json value;  // number, bool, enum label string, or array for vectors
};

struct Assertion {
    int at = -1;  // step index; -1 = episode end
    AssertKind kind = AssertKind::Var;
    std::string var;
    int index = -1;  // vector element for Var
    CmpOp op = CmpOp::Eq;
    bool has_literal = true;
    double value = 0;
    std::string value_label;  // enum literal, resolved against var's domain
    std::string var_rhs;
    int rhs_index = -1;
    double tol = 1e-9;  // for = and != on reals
    bool expect_done = true;
    ShapeKind shape = ShapeKind::Rect;
    int color = -1;  // -1 = any color
    bool present = true;
};

struct SystemTest {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<SetupOverride> setup;
    std::vector<ScriptEntry> script;
    std::vector<Assertion> assertions;
};

struct TestResult {
    std::string name;
    TestStatus status = TestStatus::Error;
    std::string message;
    std::vector<std::string> trace;
};

struct SuiteReport {
    std::vector<TestResult> results;
    int passed = 0;
    int failed = 0;
    int errors = 0;
    bool suite_error = false;
    std::string suite_error_reason;

    double pass_rate() const {
        return results.empty() ? 0.0 : static_cast<double>(passed) / results.size();
    }
};

// --- suite loading ----------------------------------------------------------

namespace detail {

inline void schema_fail(const std::string& where, const std::string& what) {
    throw SimError(DiagCode::SchemaError, where + ": " + what);
}

inline Assertion parse_assertion(const std::string& where, const nlohmann::json& a) {
    if (!a.is_object()) schema_fail(where, "assertion must be an object");
    Assertion out;
    if (!a.contains("at")) schema_fail(where, "assertion missing 'at'");
    if (a["at"].is_string()) {
        if (a["at"].get<std::string>() != "end")
            schema_fail(where, "'at' must be a step index or \"end\"");
        out.at = -1;
    } else if (a["at"].is_number_integer()) {
        out.at = a["at"].get<int>();
        if (out.at < 0) schema_fail(where, "'at' step index must be >= 0");
    } else {
        schema_fail(where, "'at' must be a step index or \"end\"");
    }
    std::string kind = a.value("kind", std::string());
    if (kind == "var") out.kind = AssertKind::Var;
    else if (kind == "cumulative_reward") out.kind = AssertKind::CumulativeReward;
    else if (kind == "step_reward") out.kind = AssertKind::StepReward;
    else if (kind == "terminated") out.kind = AssertKind::Terminated;
    else if (kind == "shape") out.kind = AssertKind::Shape;
    else schema_fail(where, "unknown assertion kind '" + kind + "'");

    if (out.kind == AssertKind::Terminated) {
        if (!a.contains("value") || !a["value"].is_boolean())
            schema_fail(where, "terminated assertion needs a boolean 'value'");
        out.expect_done = a["value"].get<bool>();
        return out;
    }
    if (out.kind == AssertKind::Shape) {
        std::string shape = a.value("shape", std::string());
        if (shape == "rect") out.shape = ShapeKind::Rect;
        else if (shape == "circle") out.shape = ShapeKind::Circle;
        else if (shape == "text") out.shape = ShapeKind::Text;
        else schema_fail(where, "unknown shape kind '" + shape + "'");
        if (a.contains("color")) {
            out.color = palette_index(a["color"].get<std::string>());
            if (out.color < 0)
                schema_fail(where, "unknown color '" + a["color"].get<std::string>() + "'");
        }
        out.present = a.value("present", true);
        return out;
    }

    if (out.kind == AssertKind::Var) {
        out.var = a.value("var", std::string());
        if (out.var.empty()) schema_fail(where, "var assertion missing 'var'");
        out.index = a.value("index", -1);
    }
    std::string op = a.value("op", std::string("="));
    if (!parse_cmp_op(op, out.op)) schema_fail(where, "unknown comparison op '" + op + "'");
    out.tol = a.value("tol", 1e-9);
    if (a.contains("var_rhs")) {
        out.has_literal = false;
        out.var_rhs = a["var_rhs"].get<std::string>();
        out.rhs_index = a.value("rhs_index", -1);
    } else if (a.contains("value")) {
        if (a["value"].is_boolean()) out.value = a["value"].get<bool>() ? 1 : 0;
        else if (a["value"].is_number()) out.value = a["value"].get<double>();
        else if (a["value"].is_string()) out.value_label = a["value"].get<std::string>();
        else schema_fail(where, "'value' must be a number, bool, or enum label");
    } else {
        schema_fail(where, "comparison assertion needs 'value' or 'var_rhs'");
    }
    return out;
}

}  // namespace detail

inline std::vector<SystemTest> parse_suite(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("tests") || !j["tests"].is_array())
        detail::schema_fail("suite", "must be a JSON object with a tests array");
    std::vector<SystemTest> tests;
    for (std::size_t i = 0; i < j["tests"].size(); ++i) {
        const auto& tj = j["tests"][i];
        std::string where = "test #" + std::to_string(i);
        if (!tj.is_object()) detail::schema_fail(where, "must be an object");
        SystemTest t;
        t.name = tj.value("name", std::string());
        if (t.name.empty()) detail::schema_fail(where, "missing name");
        where = "test '" + t.name + "'";
        for (const auto& prev : tests)
            if (prev.name == t.name) detail::schema_fail(where, "duplicate test name");
        t.seed = tj.value("seed", 0ULL);
        if (tj.contains("setup")) {
            if (!tj["setup"].is_object()) detail::schema_fail(where, "setup must be an object");
            for (auto it = tj["setup"].begin(); it != tj["setup"].end(); ++it)
                t.setup.push_back({it.key(), it.value()});
        }
        if (tj.contains("script")) {
            if (!tj["script"].is_array()) detail::schema_fail(where, "script must be an array");
            for (const auto& sj : tj["script"]) {
                ScriptEntry e;
                if (sj.is_string()) {
                    e.action = sj.get<std::string>();
                } else if (sj.is_object() && sj.contains("action")) {
                    e.action = sj["action"].get<std::string>();
                    e.repeat = sj.value("repeat", 1);
                    if (e.repeat < 1) detail::schema_fail(where, "repeat must be >= 1");
                } else {
                    detail::schema_fail(where, "script entries are action strings or "
                                               "{action, repeat} objects");
                }
                t.script.push_back(std::move(e));
            }
        }
        if (!tj.contains("assertions") || !tj["assertions"].is_array() ||
            tj["assertions"].empty())
            detail::schema_fail(where, "needs a nonempty assertions array");
        for (const auto& aj : tj["assertions"])
            t.assertions.push_back(detail::parse_assertion(where, aj));
        tests.push_back(std::move(t));
    }
    return tests;
}

inline std::vector<SystemTest> load_suite(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SimError(DiagCode::SchemaError, "cannot open suite file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_suite(ss.str());
}

// --- execution --------------------------------------------------------------

namespace detail {

// References a test makes into the program; unknowns are reported as ERROR
// before anything runs.
inline std::string precheck_test(const FactoredPOMDP& p, const SystemTest& t) {
    auto check_var = [&](const std::string& id, int index) -> std::string {
        int vi = variable_index(p, id);
        if (vi < 0) return "unknown variable '" + id + "'";
        const Domain& d = p.variables[vi].domain;
        if (index >= 0) {
            if (d.kind != DomainKind::Vec) return "variable '" + id + "' is not a vector";
            if (index >= d.size) return "index " + std::to_string(index) + " out of range for '" + id + "'";
        } else if (d.kind == DomainKind::Vec) {
            return "vector variable '" + id + "' needs an element index";
        }
        return "";
    };
    for (const auto& s : t.setup) {
        int vi = variable_index(p, s.var);
        if (vi < 0) return "setup: unknown variable '" + s.var + "'";
        const Domain& d = p.variables[vi].domain;
        if (s.value.is_string()) {
            if (d.kind != DomainKind::Enum)
                return "setup: label override on non-enum variable '" + s.var + "'";
            bool found = false;
            for (const auto& label : d.labels)
                if (label == s.value.get<std::string>()) found = true;
            if (!found)
                return "setup: unknown label '" + s.value.get<std::string>() + "' for '" +
                       s.var + "'";
        } else if (s.value.is_array()) {
            if (d.kind != DomainKind::Vec)
                return "setup: array override on non-vector variable '" + s.var + "'";
            if (static_cast<int>(s.value.size()) != d.size)
                return "setup: array override length mismatch for '" + s.var + "'";
        } else if (!s.value.is_number() && !s.value.is_boolean()) {
            return "setup: override for '" + s.var + "' must be a number, bool, label, or array";
        }
        if ((s.value.is_number() || s.value.is_boolean()) && d.kind == DomainKind::Vec)
            return "setup: vector variable '" + s.var + "' needs an array override";
    }
    for (const auto& e : t.script)
        if (action_index(p, e.action) < 0) return "script: unknown action '" + e.action + "'";
    for (std::size_t i = 0; i < t.assertions.size(); ++i) {
        const Assertion& a = t.assertions[i];
        std::string where = "assertion #" + std::to_string(i) + ": ";
        if (a.kind == AssertKind::Var) {
            std::string err = check_var(a.var, a.index);
            if (!err.empty()) return where + err;
            if (!a.value_label.empty()) {
                const Domain& d = p.variables[variable_index(p, a.var)].domain;
                if (d.kind != DomainKind::Enum)
                    return where + "label literal against non-enum variable '" + a.var + "'";
                bool found = false;
                for (const auto& label : d.labels)
                    if (label == a.value_label) found = true;
                if (!found) return where + "unknown label '" + a.value_label + "'";
            }
        }
        if ((a.kind == AssertKind::Var || a.kind == AssertKind::CumulativeReward ||
             a.kind == AssertKind::StepReward) &&
            !a.has_literal) {
            std::string err = check_var(a.var_rhs, a.rhs_index);
            if (!err.empty()) return where + err;
        }
        if (a.kind == AssertKind::StepReward && a.at == 0)
            return where + "step_reward needs a step index >= 1 or \"end\"";
    }
    return "";
}

inline double label_ordinal(const Domain& d, const std::string& label) {
    for (std::size_t i = 0; i < d.labels.size(); ++i)
        if (d.labels[i] == label) return static_cast<double>(i);
    return 0;
}

inline bool cmp(CmpOp op, double lhs, double rhs, double tol) {
    switch (op) {
        case CmpOp::Eq: return std::fabs(lhs - rhs) <= tol;
        case CmpOp::Ne: return std::fabs(lhs - rhs) > tol;
        case CmpOp::Lt: return lhs < rhs;
        case CmpOp::Le: return lhs <= rhs;
        case CmpOp::Gt: return lhs > rhs;
        case CmpOp::Ge: return lhs >= rhs;
    }
    return false;
}

struct Snapshot {
    std::vector<Value> values;
    Observation obs;
    std::string action;  // action that produced this snapshot ("" for step 0)
    double reward = 0;
    double cumulative = 0;
    bool done = false;
};

inline std::string snapshot_line(const FactoredPOMDP& p, std::size_t k, const Snapshot& s) {
    std::string line = "step " + std::to_string(k);
    if (!s.action.empty()) line += " action=" + s.action;
    line += " reward=" + format_number(s.reward);
    line += s.done ? " done" : "";
    line += " |";
    for (std::size_t i = 0; i < p.variables.size(); ++i) {
        const auto& v = p.variables[i];
        line += " " + v.id + "=";
        if (v.domain.kind == DomainKind::Vec) {
            line += "(";
            for (std::size_t e = 0; e < s.values[i].vec.size(); ++e) {
                if (e) line += ",";
                line += format_number(s.values[i].vec[e]);
            }
            line += ")";
        } else {
            line += format_number(s.values[i].num);
        }
    }
    return line;
}

}  // namespace detail

inline TestResult run_test(const FactoredPOMDP& p, const SystemTest& t) {
    TestResult result;
    result.name = t.name;

    std::string pre = detail::precheck_test(p, t);
    if (!pre.empty()) {
        result.status = TestStatus::Error;
        result.message = pre;
        return result;
    }

    std::vector<Diagnostic> warnings;
    SimState state = reset_state(p, t.seed, &warnings);
    for (const auto& s : t.setup) {
        int vi = variable_index(p, s.var);
        const Domain& d = p.variables[vi].domain;
        Value& slot = state.values[vi];
        if (s.value.is_array()) {
            for (int e = 0; e < d.size; ++e) {
                double x = s.value[e].is_boolean() ? (s.value[e].get<bool>() ? 1 : 0)
                                                   : s.value[e].get<double>();
                slot.vec[e] = std::clamp(x, d.lo, d.hi);
            }
        } else if (s.value.is_string()) {
            slot.num = detail::label_ordinal(d, s.value.get<std::string>());
        } else {
            double x = s.value.is_boolean() ? (s.value.get<bool>() ? 1 : 0)
                                            : s.value.get<double>();
            switch (d.kind) {
                case DomainKind::Bool: slot.num = x != 0 ? 1 : 0; break;
                case DomainKind::Int:
                case DomainKind::Enum:
                    slot.num = std::clamp(static_cast<double>(std::llround(x)), d.lo, d.hi);
                    break;
                default: slot.num = std::clamp(x, d.lo, d.hi); break;
            }
        }
    }
    int term_index = find_terminated_var(p);
    if (term_index >= 0) state.terminated = state.values[term_index].num != 0;

    StreamRouter router(t.seed);
    std::vector<detail::Snapshot> snaps;
    detail::Snapshot s0;
    s0.values = state.values;
    s0.obs = observe(p, state, router, &warnings);
    s0.done = state.terminated;
    snaps.push_back(std::move(s0));
    double cumulative = 0;
    bool done = snaps[0].done;
    for (const auto& entry : t.script) {
        for (int r = 0; r < entry.repeat && !done; ++r) {
            StepResult sr = step(p, state, entry.action, router, &warnings);
            state = sr.state;
            cumulative += sr.reward;
            done = sr.done;
            detail::Snapshot snap;
            snap.values = state.values;
            snap.obs = sr.observation;
            snap.action = entry.action;
            snap.reward = sr.reward;
            snap.cumulative = cumulative;
            snap.done = done;
            snaps.push_back(std::move(snap));
        }
        if (done) break;
    }

    auto value_at = [&](const detail::Snapshot& snap, const std::string& id, int index) {
        int vi = variable_index(p, id);
        return index >= 0 ? snap.values[vi].vec[index] : snap.values[vi].num;
    };

    for (std::size_t i = 0; i < t.assertions.size(); ++i) {
        const Assertion& a = t.assertions[i];
        std::size_t k = a.at < 0 ? snaps.size() - 1 : static_cast<std::size_t>(a.at);
        std::string label = "assertion #" + std::to_string(i) + " (at " +
                            (a.at < 0 ? std::string("end") : std::to_string(a.at)) + ")";
        if (k >= snaps.size()) {
            result.status = TestStatus::Fail;
            result.message = label + ": episode ended after " +
                             std::to_string(snaps.size() - 1) + " steps, before step " +
                             std::to_string(a.at);
            for (std::size_t s = snaps.size() > 4 ? snaps.size() - 4 : 0; s < snaps.size(); ++s)
                result.trace.push_back(detail::snapshot_line(p, s, snaps[s]));
            return result;
        }
        const detail::Snapshot& snap = snaps[k];
        bool ok = true;
        std::string detail_msg;
        switch (a.kind) {
            case AssertKind::Var: {
                double lhs = value_at(snap, a.var, a.index);
                double rhs;
                if (!a.has_literal) rhs = value_at(snap, a.var_rhs, a.rhs_index);
                else if (!a.value_label.empty())
                    rhs = detail::label_ordinal(
                        p.variables[variable_index(p, a.var)].domain, a.value_label);
                else rhs = a.value;
                ok = detail::cmp(a.op, lhs, rhs, a.tol);
                if (!ok)
                    detail_msg = a.var + " = " + format_number(lhs) + ", expected " +
                                 to_string(a.op) + " " + format_number(rhs);
                break;
            }
            case AssertKind::CumulativeReward: {
                double rhs = a.has_literal ? a.value : value_at(snap, a.var_rhs, a.rhs_index);
                ok = detail::cmp(a.op, snap.cumulative, rhs, a.tol);
                if (!ok)
                    detail_msg = "cumulative reward = " + format_number(snap.cumulative) +
                                 ", expected " + to_string(a.op) + " " + format_number(rhs);
                break;
            }
            case AssertKind::StepReward: {
                double rhs = a.has_literal ? a.value : value_at(snap, a.var_rhs, a.rhs_index);
                ok = detail::cmp(a.op, snap.reward, rhs, a.tol);
                if (!ok)
                    detail_msg = "step reward = " + format_number(snap.reward) + ", expected " +
                                 to_string(a.op) + " " + format_number(rhs);
                break;
            }
            case AssertKind::Terminated: {
                ok = snap.done == a.expect_done;
                if (!ok)
                    detail_msg = std::string("episode ") +
                                 (snap.done ? "terminated" : "did not terminate") +
                                 ", expected the opposite";
                break;
            }
            case AssertKind::Shape: {
                bool found = false;
                for (const auto& shape : snap.obs.shapes)
                    if (shape.kind == a.shape && (a.color < 0 || shape.color == a.color))
                        found = true;
                ok = found == a.present;
                if (!ok)
                    detail_msg = std::string(a.present ? "missing" : "unexpected") + " " +
                                 to_string(a.shape) + " primitive" +
                                 (a.color >= 0 ? " of color " + palette_names()[a.color] : "");
                break;
            }
        }
        if (!ok) {
            result.status = TestStatus::Fail;
            result.message = label + ": " + detail_msg;
            std::size_t lo = k > 3 ? k - 3 : 0;
            for (std::size_t s = lo; s <= k; ++s)
                result.trace.push_back(detail::snapshot_line(p, s, snaps[s]));
            return result;
        }
    }
    result.status = TestStatus::Pass;
    return result;
}

inline SuiteReport run_suite(const FactoredPOMDP& p, const std::vector<SystemTest>& tests) {
    SuiteReport report;
    if (tests.empty()) {
        report.suite_error = true;
        report.suite_error_reason = "suite contains no runnable tests";
        return report;
    }
    for (const auto& t : tests) report.results.push_back(run_test(p, t));
    std::sort(report.results.begin(), report.results.end(),
              [](const TestResult& a, const TestResult& b) { return a.name < b.name; });
    for (const auto& r : report.results) {
        if (r.status == TestStatus::Pass) ++report.passed;
        else if (r.status == TestStatus::Fail) ++report.failed;
        else ++report.errors;
    }
    return report;
}

inline nlohmann::ordered_json report_to_json(const SuiteReport& r) {
    nlohmann::ordered_json j;
    if (r.suite_error) {
        j["suite_error"] = r.suite_error_reason;
        return j;
    }
    j["tests"] = nlohmann::ordered_json::array();
    for (const auto& t : r.results) {
        nlohmann::ordered_json tj;
        tj["name"] = t.name;
        tj["status"] = to_string(t.status);
        if (!t.message.empty()) tj["message"] = t.message;
        if (!t.trace.empty()) tj["trace"] = t.trace;
        j["tests"].push_back(std::move(tj));
    }
    j["passed"] = r.passed;
    j["failed"] = r.failed;
    j["errors"] = r.errors;
    j["total"] = static_cast<int>(r.results.size());
    j["pass_rate"] = r.pass_rate();
    return j;
}

inline std::string render_report_text(const SuiteReport& r) {
    std::ostringstream out;
    if (r.suite_error) {
        out << "suite ERROR: " << r.suite_error_reason << "\n";
        return out.str();
    }
    std::size_t width = 4;
    for (const auto& t : r.results) width = std::max(width, t.name.size());
    for (const auto& t : r.results) {
        out << t.name << std::string(width - t.name.size() + 2, ' ') << to_string(t.status);
        if (!t.message.empty()) out << "  " << t.message;
        out << "\n";
        for (const auto& line : t.trace) out << "    " << line << "\n";
    }
    out << "passed " << r.passed << "/" << r.results.size() << " (pass rate "
        << format_number(r.pass_rate()) << ")\n";
    return out.str();
}

}  // namespace fsim
