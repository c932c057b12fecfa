#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

namespace ssvep::detail {

// FFTW planning is not thread-safe; execution is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

/// One-sided DFT of a real sequence: n/2 + 1 bins, unnormalized.
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  const std::size_t nb = x.size() / 2 + 1;
  double* in = fftw_alloc_real(x.size());
  fftw_complex* out = fftw_alloc_complex(nb);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = x[i];
  fftw_execute(plan);
  std::vector<std::complex<double>> result(nb);
  for (std::size_t k = 0; k < nb; ++k) result[k] = {out[k][0], out[k][1]};
  {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return result;
}

/// Inverse of rfft for a length-n real sequence, normalized by 1/n.
inline std::vector<double> irfft(std::span<const std::complex<double>> spec, std::size_t n) {
  const std::size_t nb = n / 2 + 1;
  fftw_complex* in = fftw_alloc_complex(nb);
  double* out = fftw_alloc_real(n);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  for (std::size_t k = 0; k < nb; ++k) {
    const auto v = k < spec.size() ? spec[k] : std::complex<double>{};
    in[k][0] = v.real();
    in[k][1] = v.imag();
  }
  fftw_execute(plan);
  std::vector<double> result(n);
  for (std::size_t i = 0; i < n; ++i) result[i] = out[i] / static_cast<double>(n);
  {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return result;
}

}  // namespace ssvep::detail
