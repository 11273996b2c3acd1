#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

namespace snlab {

using cplx = std::complex<double>;

/// In-place complex FFT of a fixed length backed by FFTW.
///
/// Plans are created once per length and shared. FFTW planning is not
/// thread-safe, so creation is serialized through a global mutex; execution
/// through the new-array interface is safe from any thread.
class FftPlan {
 public:
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  static std::shared_ptr<const FftPlan> get(std::size_t n) {
    // The planner mutex must outlive the cache, whose plans lock it on destruction.
    planner_mutex();
    static std::map<std::size_t, std::shared_ptr<const FftPlan>> cache;
    static std::mutex cache_mutex;
    std::lock_guard lock(cache_mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::shared_ptr<const FftPlan>(new FftPlan(n));
    return slot;
  }

  std::size_t size() const { return n_; }

  /// X_m = sum_k x_k exp(-2 pi i k m / n)
  void forward(std::span<cplx> data) const { run(forward_, data); }

  /// Unnormalized inverse; divide by size() to undo forward().
  void backward(std::span<cplx> data) const { run(backward_, data); }

 private:
  explicit FftPlan(std::size_t n) : n_(n) {
    std::vector<cplx> scratch(n);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    const int len = static_cast<int>(n);
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_1d(len, p, p, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    backward_ = fftw_plan_dft_1d(len, p, p, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }

  void run(fftw_plan plan, std::span<cplx> data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
  }

  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t n_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Angular wavenumbers matching FFT ordering: k_m = 2 pi m / (n dx) with m
/// wrapped to [-n/2, n/2).
inline std::vector<double> wavenumbers(std::size_t n, double dx) {
  std::vector<double> k(n);
  const double scale = 2.0 * std::numbers::pi / (static_cast<double>(n) * dx);
  for (std::size_t m = 0; m < n; ++m) {
    const auto signed_m = m < n / 2 ? static_cast<double>(m)
                                    : static_cast<double>(m) - static_cast<double>(n);
    k[m] = scale * signed_m;
  }
  return k;
}

}  // namespace snlab
