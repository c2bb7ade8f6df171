#pragma once

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "fracgo/field.hpp"

namespace fracgo {
namespace detail {

// One plan pair per grid shape, reused across calls. FFTW planning is not
// thread-safe and execution here shares the engine buffers, so each engine
// serializes itself; distinct shapes run concurrently.
struct FftEngine {
  Eigen::Index n0 = 0, n1 = 0;
  fftw_complex* buf_in = nullptr;
  fftw_complex* buf_out = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::mutex mtx;

  FftEngine(Eigen::Index n0_, Eigen::Index n1_) : n0(n0_), n1(n1_) {
    const Eigen::Index n = n0 * n1;
    buf_in = fftw_alloc_complex(size_t(n));
    buf_out = fftw_alloc_complex(size_t(n));
    if (n1 == 1) {
      fwd = fftw_plan_dft_1d(int(n0), buf_in, buf_out, FFTW_FORWARD, FFTW_ESTIMATE);
      bwd = fftw_plan_dft_1d(int(n0), buf_in, buf_out, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
      fwd = fftw_plan_dft_2d(int(n0), int(n1), buf_in, buf_out, FFTW_FORWARD, FFTW_ESTIMATE);
      bwd = fftw_plan_dft_2d(int(n0), int(n1), buf_in, buf_out, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
  }
  ~FftEngine() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(buf_in);
    fftw_free(buf_out);
  }
  FftEngine(const FftEngine&) = delete;

  void run(const std::complex<double>* in, std::complex<double>* out, bool forward) {
    std::lock_guard<std::mutex> lock(mtx);
    const Eigen::Index n = n0 * n1;
    // std::complex<double> is layout-compatible with fftw_complex
    std::memcpy(static_cast<void*>(buf_in), static_cast<const void*>(in),
                size_t(n) * sizeof(fftw_complex));
    fftw_execute(forward ? fwd : bwd);
    std::memcpy(static_cast<void*>(out), static_cast<const void*>(buf_out),
                size_t(n) * sizeof(fftw_complex));
  }
};

inline FftEngine& engine_for(Eigen::Index n0, Eigen::Index n1) {
  static std::mutex cache_mtx;
  static std::map<std::pair<Eigen::Index, Eigen::Index>, std::unique_ptr<FftEngine>> cache;
  std::lock_guard<std::mutex> lock(cache_mtx);
  auto& slot = cache[{n0, n1}];
  if (!slot) slot = std::make_unique<FftEngine>(n0, n1);
  return *slot;
}

}  // namespace detail

// Unnormalized forward DFT (e^{-ikx} convention); inverse applies 1/N.
inline Field<double> fft_forward(const Field<double>& u) {
  Field<double> out(u.grid);
  detail::engine_for(u.grid.sizes[0], u.grid.sizes[1]).run(u.values.data(), out.values.data(), true);
  return out;
}

inline Field<double> fft_inverse(const Field<double>& spec) {
  Field<double> out(spec.grid);
  detail::engine_for(spec.grid.sizes[0], spec.grid.sizes[1]).run(spec.values.data(), out.values.data(), false);
  out.values /= double(spec.grid.points());
  return out;
}

}  // namespace fracgo
