#include "evlab/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace evlab::kernels {

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* choose() {
    const Ops* vec = cpu_has_avx2_fma() ? avx2_ops() : nullptr;
    const char* want = std::getenv("EVLAB_KERNELS");
    if (want) {
        if (std::strcmp(want, "scalar") == 0) return &scalar_ops();
        if (std::strcmp(want, "avx2") == 0) {
            if (vec) return vec;
            std::fprintf(stderr, "evlab: EVLAB_KERNELS=avx2 requested but unsupported, using scalar\n");
            return &scalar_ops();
        }
        if (std::strcmp(want, "auto") != 0)
            std::fprintf(stderr, "evlab: unknown EVLAB_KERNELS=%s, using auto\n", want);
    }
    return vec ? vec : &scalar_ops();
}

} // namespace

const Ops& active() {
    static const Ops* chosen = choose();
    return *chosen;
}

} // namespace evlab::kernels
