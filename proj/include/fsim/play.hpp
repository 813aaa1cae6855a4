#pragma once

#include <sys/select.h>
#include <termios.h>
#include <unistd.h>

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "fsim/format.hpp"
#include "fsim/runtime.hpp"

namespace fsim {

// Interactive terminal session: raster drawn as colored background cells at a
// fixed tick rate, keys mapped to action tokens, unpressed ticks send NOOP.

struct PlayConfig {
    std::uint64_t seed = 0;
    int fps = 15;
    int width = 64;
    int height = 64;
    std::map<char, std::string> keymap;  // empty: digits 1..9 in action order
};

namespace detail {

// 256-color approximations of the drawing palette.
inline int ansi_color(int palette) {
    static const int codes[16] = {16,  231, 244, 250, 196, 40,  21,  226,
                                  51,  201, 208, 93,  130, 218, 18,  30};
    return palette >= 0 && palette < 16 ? codes[palette] : 16;
}

struct RawTerminal {
    termios saved{};
    bool active = false;
    RawTerminal() {
        if (!isatty(STDIN_FILENO)) return;
        if (tcgetattr(STDIN_FILENO, &saved) != 0) return;
        termios raw = saved;
        raw.c_lflag &= ~static_cast<tcflag_t>(ICANON | ECHO);
        raw.c_cc[VMIN] = 0;
        raw.c_cc[VTIME] = 0;
        if (tcsetattr(STDIN_FILENO, TCSANOW, &raw) == 0) active = true;
    }
    ~RawTerminal() {
        if (active) tcsetattr(STDIN_FILENO, TCSANOW, &saved);
    }
};

inline int poll_key(int timeout_ms) {
    fd_set fds;
    FD_ZERO(&fds);
    FD_SET(STDIN_FILENO, &fds);
    timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
    int last = -1;
    while (select(STDIN_FILENO + 1, &fds, nullptr, nullptr, &tv) > 0) {
        char c;
        if (read(STDIN_FILENO, &c, 1) != 1) break;
        last = c;
        tv = {0, 0};
        FD_ZERO(&fds);
        FD_SET(STDIN_FILENO, &fds);
    }
    return last;
}

inline void draw_frame(const Raster& raster, double score, long long step, bool done) {
    std::string out = "\x1b[H";
    for (int y = 0; y < raster.h; ++y) {
        for (int x = 0; x < raster.w; ++x) {
            out += "\x1b[48;5;" + std::to_string(ansi_color(raster.at(x, y))) + "m  ";
        }
        out += "\x1b[0m\n";
    }
    out += "score " + format_number(score) + "  step " + std::to_string(step);
    if (done) out += "  [over]";
    out += "   (q quits)\x1b[K\n";
    std::fwrite(out.data(), 1, out.size(), stdout);
    std::fflush(stdout);
}

}  // namespace detail

inline int play(const FactoredPOMDP& p, const PlayConfig& cfg) {
    std::map<char, std::string> keymap = cfg.keymap;
    if (keymap.empty()) {
        for (std::size_t i = 0; i < p.actions.size() && i < 9; ++i)
            keymap[static_cast<char>('1' + i)] = p.actions[i];
    }

    std::printf("\x1b[2J\x1b[H");
    std::printf("keys:");
    for (const auto& [key, action] : keymap) std::printf("  %c=%s", key, action.c_str());
    std::printf("  (q quits)\n");

    detail::RawTerminal raw;
    StreamRouter router(cfg.seed);
    auto [state, obs] = reset(p, cfg.seed, router);
    double score = p.score_index >= 0 ? state.values[p.score_index].num : 0;
    int tick_ms = cfg.fps > 0 ? 1000 / cfg.fps : 66;

    std::printf("\x1b[2J");
    detail::draw_frame(render(obs, cfg.width, cfg.height), score, state.step_count,
                       state.terminated);
    while (!state.terminated && state.step_count < p.max_steps) {
        int key = detail::poll_key(tick_ms);
        if (key == 'q' || key == 3) break;
        std::string action = "NOOP";
        auto it = keymap.find(static_cast<char>(key));
        if (it != keymap.end()) action = it->second;
        StepResult r = step(p, state, action, router);
        state = r.state;
        obs = r.observation;
        score = p.score_index >= 0 ? state.values[p.score_index].num : 0;
        detail::draw_frame(render(obs, cfg.width, cfg.height), score, state.step_count,
                           r.done);
        if (r.done) break;
    }
    std::printf("final score %s after %lld steps\n", format_number(score).c_str(),
                static_cast<long long>(state.step_count));
    return 0;
}

}  // namespace fsim
