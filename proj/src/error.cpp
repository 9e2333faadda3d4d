#include "roomforge/error.hpp"

namespace roomforge {

ParseError::ParseError(const std::string& what, std::size_t position)
    : ValidationError("at offset " + std::to_string(position) + ": " + what), position_(position) {}

}  // namespace roomforge
