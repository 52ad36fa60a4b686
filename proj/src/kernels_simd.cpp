// SIMD backend: this TU is compiled with -mavx2 -mfma on x86-64 (see
// src/CMakeLists.txt); on aarch64 NEON is implied by the base ISA.
#define PLM_KERNEL_BACKEND simd_registry
#define PLM_KERNEL_NAME "simd"
#include "kernels_impl.inl"
