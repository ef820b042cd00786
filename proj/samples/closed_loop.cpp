// Drives the bundled 300 s cycle with the rule-based controller and with
// an untrained policy, then prints both rows side by side.

#include <iostream>
#include <string>

#include "ecodrive/harness/run.hpp"

int main(int argc, char** argv) {
  using namespace ecodrive;
  std::string path = argc > 1 ? argv[1] : std::string(ECODRIVE_DATA_DIR) + "/cycles/stopgo_300.csv";
  DriveCycle cycle = load_cycle(path);

  RunConfig cfg;
  cfg.mpo.actor_hidden = {32, 32};
  cfg.mpo.critic_hidden = {32, 32};
  MpoLearner untrained(cfg.mpo, 1);

  auto rows = compare_run(cfg, cycle, {{"untrained", untrained.checkpoint()}});
  write_comparison_table(std::cout, rows);
  return 0;
}
