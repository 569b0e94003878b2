#include "dnahnet/errors.hpp"

#include <sstream>

namespace dnahnet {

Error::Error(ErrorKind kind, std::string module, const std::string& what)
    : std::runtime_error(what), kind_(kind), module_(std::move(module)) {}

namespace {

std::string describe_positions(const std::vector<std::size_t>& positions) {
    std::ostringstream os;
    os << "non-ACGT symbols at positions [";
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (i == 8) {
            os << ", ... (" << positions.size() << " total)";
            break;
        }
        os << (i ? ", " : "") << positions[i];
    }
    os << "]";
    return os.str();
}

}  // namespace

AmbiguityError::AmbiguityError(std::vector<std::size_t> positions)
    : Error(ErrorKind::data, "seqdata", describe_positions(positions)),
      positions_(std::move(positions)) {}

ParseError::ParseError(std::string source, std::size_t line, const std::string& reason)
    : Error(ErrorKind::data, "seqdata", source + ":" + std::to_string(line) + ": " + reason),
      line_(line) {}

LayoutError::LayoutError(std::size_t offset, const std::string& reason)
    : Error(ErrorKind::data, "layers", "layout offset " + std::to_string(offset) + ": " + reason),
      offset_(offset) {}

}  // namespace dnahnet
