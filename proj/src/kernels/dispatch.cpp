#include "ldc/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace ldc::kern {
namespace {

struct Selection {
  const Ops* table;
  Backend backend;
};

Selection select() {
  const char* pref = std::getenv("LDC_KERNELS");
  if (pref != nullptr) {
    if (std::strcmp(pref, "scalar") == 0) return {&scalar_ops(), Backend::Scalar};
    if (std::strcmp(pref, "avx2") == 0 && avx2_ops() != nullptr)
      return {avx2_ops(), Backend::Avx2};
    if (std::strcmp(pref, "neon") == 0 && neon_ops() != nullptr)
      return {neon_ops(), Backend::Neon};
    // unknown or unavailable preference falls through to auto
  }
  if (const Ops* t = avx2_ops()) return {t, Backend::Avx2};
  if (const Ops* t = neon_ops()) return {t, Backend::Neon};
  return {&scalar_ops(), Backend::Scalar};
}

const Selection& selection() {
  static const Selection s = select();
  return s;
}

}  // namespace

const Ops& ops() { return *selection().table; }

Backend active_backend() { return selection().backend; }

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "?";
}

}  // namespace ldc::kern
