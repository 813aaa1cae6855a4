#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fsim/diag.hpp"

namespace fsim {

// Prompt text lives in template files, one per pipeline phase, so wording is
// editable without a rebuild. Placeholders are {{name}}; rendering with a
// missing binding is a hard error because a half-filled prompt must never
// reach a provider.

struct PromptSet {
    std::string system;
    std::string decompose;
    std::string decompose_retry;
    std::string select_context;
    std::string select_context_retry;
    std::string gen_controller;
    std::string gen_model;
    std::string gen_view;
    std::string repair;
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SimError(DiagCode::SchemaError, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline PromptSet load_prompts(const std::string& dir) {
    PromptSet p;
    p.system = read_text_file(dir + "/system.txt");
    p.decompose = read_text_file(dir + "/decompose.txt");
    p.decompose_retry = read_text_file(dir + "/decompose_retry.txt");
    p.select_context = read_text_file(dir + "/select_context.txt");
    p.select_context_retry = read_text_file(dir + "/select_context_retry.txt");
    p.gen_controller = read_text_file(dir + "/gen_controller.txt");
    p.gen_model = read_text_file(dir + "/gen_model.txt");
    p.gen_view = read_text_file(dir + "/gen_view.txt");
    p.repair = read_text_file(dir + "/repair.txt");
    return p;
}

inline std::string render_template(const std::string& tmpl,
                                   const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        std::size_t open = tmpl.find("{{", i);
        if (open == std::string::npos) {
            out.append(tmpl, i, tmpl.size() - i);
            break;
        }
        out.append(tmpl, i, open - i);
        std::size_t close = tmpl.find("}}", open + 2);
        if (close == std::string::npos)
            throw SimError(DiagCode::SchemaError, "unterminated {{ in prompt template");
        std::string name = tmpl.substr(open + 2, close - open - 2);
        auto it = bindings.find(name);
        if (it == bindings.end())
            throw SimError(DiagCode::SchemaError,
                           "prompt template references unbound placeholder {{" + name + "}}");
        out += it->second;
        i = close + 2;
    }
    return out;
}

}  // namespace fsim
