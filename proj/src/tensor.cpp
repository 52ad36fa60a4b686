#include "plm/tensor.hpp"

namespace plm::nn {

template class Tape<float>;
template class Tape<double>;

}  // namespace plm::nn
