#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsts/env.hpp"

// Built-in gridworlds. Layouts are line-oriented ASCII, one cell per column:
//   #  wall          .  floor         L  lava
//   1  key 1         2  key 2         D  door (starts closed)
//   G  goal          F  fire          S  survivor
//   X  extinguisher  A@<d>  agent start facing d in {N,E,S,W}
// The agent cell consumes three characters (e.g. "A@E"); everything else is a
// single character. Rows must all have the same number of cells.

namespace lsts::grid {

struct InvalidLayoutError : std::runtime_error {
  explicit InvalidLayoutError(const std::string& what) : std::runtime_error(what) {}
};

enum class Terrain : uint8_t { Floor, Wall, Lava };

struct GridLayout {
  int width = 0;
  int height = 0;
  std::vector<Terrain> terrain;  // row-major
  int agent_x = -1, agent_y = -1, agent_dir = 1;  // 0=N 1=E 2=S 3=W
  int key1 = -1, key2 = -1;                       // cell indices, -1 when absent
  int door = -1, goal = -1;
  int fire = -1, survivor = -1, extinguisher = -1;

  int cell(int x, int y) const { return y * width + x; }
  Terrain at(int x, int y) const { return terrain[cell(x, y)]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

GridLayout parse_layout(const std::string& text);
GridLayout load_layout(const std::string& path);

// Shortest walking distance between two cells treating doors as open and
// objects as passable; -1 when disconnected. Used by layout invariants.
int walk_distance(const GridLayout& l, int from_cell, int to_cell);

constexpr uint8_t kHeld = 0xFF;

// ---------------------------------------------------------------------------
// Two-room door-and-keys world. Atoms: k1/k2 (key held), d (door open),
// g (agent on goal), l (agent on lava). Actions: 0 forward, 1 rotate left,
// 2 rotate right, 3 pickup, 4 drop, 5 toggle. Toggling needs any key in hand
// and flips the door. Episodes end on lava, on the goal, or after
// max_episode_steps.
class DoorKeyEnv final : public env::LabeledMdp {
 public:
  struct State {
    uint8_t x = 0, y = 0, dir = 0;
    uint8_t k1 = 0, k2 = 0;  // cell index or kHeld
    bool door_open = false;
  };

  DoorKeyEnv(GridLayout layout, int max_steps = 500);

  uint64_t reset(uint64_t seed) override;
  env::StepResult step(int action) override;
  uint64_t state_key() const override;
  uint32_t labels_mask() const override;
  bool terminal() const override { return terminal_; }
  int action_count() const override { return 6; }
  int max_episode_steps() const override { return max_steps_; }
  const std::vector<std::string>& atoms() const override;
  std::unique_ptr<env::LabeledMdp> clone() const override;

  // Test hooks.
  const State& state() const { return s_; }
  void set_state(const State& s);
  const GridLayout& layout() const { return layout_; }
  static uint64_t pack(const State& s);

 private:
  GridLayout layout_;
  int max_steps_;
  State s_;
  int steps_ = 0;
  bool terminal_ = false;
  env::StepOutcome outcome_ = env::StepOutcome::Running;

  bool cell_blocked(int x, int y) const;
  env::StepOutcome current_outcome() const;
};

// ---------------------------------------------------------------------------
// Search-and-rescue world. Atoms: k (key held), d (door open),
// x (extinguisher held), f (fire put out), s (survivor rescued), g (agent on
// goal). Actions add 6 `use`: facing the fire with the extinguisher puts it
// out; facing the survivor rescues them. One-slot inventory shared by key and
// extinguisher. Episodes end on the goal or after max_episode_steps.
class SearchRescueEnv final : public env::LabeledMdp {
 public:
  struct State {
    uint8_t x = 0, y = 0, dir = 0;
    uint8_t key = 0, ext = 0;  // cell index or kHeld
    bool door_open = false;
    bool fire_out = false;
    bool rescued = false;
  };

  SearchRescueEnv(GridLayout layout, int max_steps = 500);

  uint64_t reset(uint64_t seed) override;
  env::StepResult step(int action) override;
  uint64_t state_key() const override;
  uint32_t labels_mask() const override;
  bool terminal() const override { return terminal_; }
  int action_count() const override { return 7; }
  int max_episode_steps() const override { return max_steps_; }
  const std::vector<std::string>& atoms() const override;
  std::unique_ptr<env::LabeledMdp> clone() const override;

  const State& state() const { return s_; }
  void set_state(const State& s);
  const GridLayout& layout() const { return layout_; }
  static uint64_t pack(const State& s);

 private:
  GridLayout layout_;
  int max_steps_;
  State s_;
  int steps_ = 0;
  bool terminal_ = false;
  env::StepOutcome outcome_ = env::StepOutcome::Running;

  bool cell_blocked(int x, int y) const;
  env::StepOutcome current_outcome() const;
};

// Factory keyed by the config's env name ("doorkey" or "search_rescue").
std::unique_ptr<env::LabeledMdp> make_env(const std::string& name, const GridLayout& layout,
                                          int max_steps);

}  // namespace lsts::grid
