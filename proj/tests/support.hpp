#pragma once

#include <functional>
#include <optional>

#include "hadl/error.hpp"

namespace support {

// Kind of the hadl::Error thrown by fn, or nullopt if it returns normally.
inline std::optional<hadl::ErrorKind> thrown_kind(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const hadl::Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

}  // namespace support
