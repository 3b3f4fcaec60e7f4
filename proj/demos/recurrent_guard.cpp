// Recurrent quadratic unit on Mackey-Glass with an aggressive learning rate.
// The stability guard watches rho(I + M (R - S)) and backs the rate off.

#include <iostream>

#include "honu/honu.hpp"

int main() {
  honu::MackeyGlassParams p;
  p.length = 1200;
  p.transient = 500;
  const auto series = honu::mackey_glass(p);

  honu::RecurrentConfig cfg{10, 7, 11, 2, false};
  honu::SequenceData data{series.samples, series.samples};
  honu::MonitorOptions monitor;
  monitor.guard = honu::GuardPolicy{};

  auto run = honu::train_rtrl(honu::RecurrentState(cfg), data, 1000,
                              honu::LearningRateScheme::fixed(0.05), 3, monitor);
  for (const auto& e : run.result.epochs)
    std::cout << "epoch " << e.epoch << " SSE " << e.sse << " MAE " << e.mae << '\n';
  std::cout << "guard triggers " << run.result.guard_triggers << '\n';
}
