#include "mixwb/net.hpp"

namespace mixwb::net {

template class GridNet<float>;
template class GridNet<double>;

}  // namespace mixwb::net
