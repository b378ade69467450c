#include "dfv2/errors.hpp"

namespace dfv2 {

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != 0) out += "x";
        out += std::to_string(shape[i]);
    }
    out += "]";
    return out;
}

} // namespace dfv2
