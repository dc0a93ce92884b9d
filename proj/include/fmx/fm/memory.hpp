#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fmx/gridworld_env.hpp"

namespace fmx::fm {

/// Append-only interaction history inserted verbatim into every prompt.
class TranscriptMemory {
public:
    void append(std::string line) { lines_.push_back(std::move(line)); }

    const std::vector<std::string>& lines() const { return lines_; }
    std::size_t size() const { return lines_.size(); }
    bool empty() const { return lines_.empty(); }
    void clear() { lines_.clear(); }

    /// Lines joined by newlines, no trailing newline.
    std::string render() const {
        std::string out;
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            if (i) out += '\n';
            out += lines_[i];
        }
        return out;
    }

private:
    std::vector<std::string> lines_;
};

inline std::string bandit_memory_line(std::size_t arm, int reward) {
    return "Pulled arm " + std::to_string(arm) + " resulting in a reward of " + std::to_string(reward);
}

inline std::string grid_memory_line(const std::string& action, Cell from, Cell to, bool got_reward) {
    return "Executed " + action + " at " + to_string(from) + " resulting in " + to_string(to) +
           (got_reward ? " and a reward." : " and no reward.");
}

inline TranscriptMemory& append_bandit_memory(TranscriptMemory& memory, std::size_t arm, int reward) {
    memory.append(bandit_memory_line(arm, reward));
    return memory;
}

inline TranscriptMemory& append_grid_memory(TranscriptMemory& memory, const std::string& action, Cell from, Cell to,
                                            bool got_reward) {
    memory.append(grid_memory_line(action, from, to, got_reward));
    return memory;
}

inline TranscriptMemory& append_plan(TranscriptMemory& memory, const std::string& plan) {
    memory.append("Plan: " + plan);
    return memory;
}

}  // namespace fmx::fm
