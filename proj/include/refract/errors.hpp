#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace refract {

/// Domain failure carrying a short machine-readable kind ("multiple_root",
/// "count_mismatch", ...) next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

}  // namespace refract
