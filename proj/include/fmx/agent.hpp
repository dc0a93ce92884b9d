#pragma once

#include <string>

#include "fmx/env_core.hpp"

namespace fmx {

/// Common policy surface for every agent driven by the runner or used as a guide.
class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string name() const = 0;
    virtual void begin_episode() {}
    virtual ActionIndex act(const Observation& observation) = 0;
    virtual void observe(ActionIndex /*action*/, double /*reward*/, const StepResult& /*result*/) {}
};

}  // namespace fmx
