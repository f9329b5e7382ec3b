#include "tactile/tensor.hpp"

#include <cmath>

namespace tactile {

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

template <typename T>
bool Tensor<T>::all_finite() const {
    for (T v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

template class Tensor<float>;
template class Tensor<double>;

} // namespace tactile
