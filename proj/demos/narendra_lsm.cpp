// Fits a cubic unit to the noisy Narendra plant by least squares and
// compares the test error against the noisy and the noiseless output.

#include <cmath>
#include <iostream>

#include "honu/honu.hpp"

int main() {
  const std::size_t train = 300, test = 700;
  auto s = honu::narendra_series(train + test + 2, 1, 2, honu::NoiseSpec::with_snr(4.83));

  honu::Matrix x(train + test, 4);
  honu::Vector y(train + test);
  for (std::size_t i = 0; i < train + test; ++i) {
    const std::size_t k = i + 1;
    x.row(static_cast<Eigen::Index>(i)) << 1.0, s.y_p[k], s.y_p[k - 1], s.u[k];
    y[static_cast<Eigen::Index>(i)] = s.y_p[k + 1];
  }
  const honu::TrainingSet all(x, y);
  const auto w = honu::lsm_fit(all.slice(0, train), 3);
  const honu::Vector out = honu::forward_batch(w, all.slice(train, test).patterns());

  double mae_noisy = 0.0, mae_true = 0.0;
  for (std::size_t i = 0; i < test; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    mae_noisy += std::abs(s.y_p[train + i + 2] - out[k]);
    mae_true += std::abs(s.y_true[train + i + 2] - out[k]);
  }
  std::cout << "SNR " << s.snr_db << " dB\n"
            << "test MAE vs noisy targets " << mae_noisy / test << '\n'
            << "test MAE vs true signal   " << mae_true / test << '\n';
}
