// Reference backend: forces the plain scalar loops regardless of the arch
// flags this TU happens to be compiled with.
#define PLM_FORCE_SCALAR 1
#define PLM_KERNEL_BACKEND scalar_registry
#define PLM_KERNEL_NAME "scalar"
#include "kernels_impl.inl"
