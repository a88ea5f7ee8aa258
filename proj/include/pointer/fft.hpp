#pragma once

#include "grid.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace pointer {

/// FFTW-backed 1D transforms on Eigen vectors. Plans are created with FFTW_ESTIMATE so that
/// results are bit-reproducible run to run. Forward is unscaled, inverse divides by n.
/// Not shareable across threads; give each worker its own instance.
class Spectral
{
public:
  Spectral() = default;
  Spectral(Spectral const &) = delete;
  Spectral &operator=(Spectral const &) = delete;
  Spectral(Spectral &&other) noexcept
    : plans_(std::move(other.plans_))
  {
    other.plans_.clear();
  }
  Spectral &operator=(Spectral &&) = delete;

  ~Spectral()
  {
    std::lock_guard lock(planner_mutex());
    for (auto &[key, plan] : plans_) {
      fftw_destroy_plan(plan);
    }
  }

  void forward(Eigen::VectorXcd &out, Eigen::VectorXcd const &in)
  {
    out.resize(in.size());
    buffer_ = in;
    fftw_execute_dft(plan(Kind::Forward, in.size()), as_fftw(buffer_.data()), as_fftw(out.data()));
  }

  void inverse(Eigen::VectorXcd &out, Eigen::VectorXcd const &in)
  {
    out.resize(in.size());
    buffer_ = in;
    fftw_execute_dft(plan(Kind::Backward, in.size()), as_fftw(buffer_.data()), as_fftw(out.data()));
    out /= static_cast<double>(in.size());
  }

  void forward_real(Eigen::VectorXcd &half_spectrum, Eigen::VectorXd const &in)
  {
    half_spectrum.resize(in.size() / 2 + 1);
    real_buffer_ = in;
    fftw_execute_dft_r2c(plan(Kind::RealForward, in.size()), real_buffer_.data(), as_fftw(half_spectrum.data()));
  }

  void inverse_real(Eigen::VectorXd &out, Eigen::VectorXcd const &half_spectrum, Eigen::Index n)
  {
    out.resize(n);
    buffer_ = half_spectrum;
    fftw_execute_dft_c2r(plan(Kind::RealBackward, n), as_fftw(buffer_.data()), out.data());
    out /= static_cast<double>(n);
  }

  /// psi <- IFFT(phase .* FFT(psi)).
  void multiply_in_fourier(Eigen::VectorXcd &psi, Eigen::VectorXcd const &phase)
  {
    forward(work_, psi);
    work_.array() *= phase.array();
    inverse(psi, work_);
  }

private:
  enum class Kind { Forward, Backward, RealForward, RealBackward };

  static std::mutex &planner_mutex()
  {
    static std::mutex m;
    return m;
  }

  static fftw_complex *as_fftw(std::complex<double> *p) { return reinterpret_cast<fftw_complex *>(p); }

  fftw_plan plan(Kind kind, Eigen::Index n)
  {
    auto const key = std::make_pair(static_cast<int>(kind), n);
    if (auto it = plans_.find(key); it != plans_.end()) {
      return it->second;
    }
    std::lock_guard lock(planner_mutex());
    Eigen::VectorXcd a(n), b(n);
    Eigen::VectorXd r(n);
    unsigned const flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    int const len = static_cast<int>(n);
    fftw_plan p = nullptr;
    switch (kind) {
    case Kind::Forward:
      p = fftw_plan_dft_1d(len, as_fftw(a.data()), as_fftw(b.data()), FFTW_FORWARD, flags);
      break;
    case Kind::Backward:
      p = fftw_plan_dft_1d(len, as_fftw(a.data()), as_fftw(b.data()), FFTW_BACKWARD, flags);
      break;
    case Kind::RealForward:
      p = fftw_plan_dft_r2c_1d(len, r.data(), as_fftw(a.data()), flags);
      break;
    case Kind::RealBackward:
      p = fftw_plan_dft_c2r_1d(len, as_fftw(a.data()), r.data(), flags);
      break;
    }
    plans_.emplace(key, p);
    return p;
  }

  std::map<std::pair<int, Eigen::Index>, fftw_plan> plans_;
  Eigen::VectorXcd buffer_;
  Eigen::VectorXd real_buffer_;
  Eigen::VectorXcd work_;
};

} // namespace pointer
