#include "lsts/gridworld.hpp"

#include <deque>
#include <fstream>
#include <sstream>

namespace lsts::grid {

namespace {

int dir_from_char(char c, int line) {
  switch (c) {
    case 'N': return 0;
    case 'E': return 1;
    case 'S': return 2;
    case 'W': return 3;
  }
  throw InvalidLayoutError("line " + std::to_string(line) +
                           ": agent direction must be one of N,E,S,W, got '" + std::string(1, c) +
                           "'");
}

constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {-1, 0, 1, 0};

}  // namespace

GridLayout parse_layout(const std::string& text) {
  GridLayout l;
  std::vector<std::vector<char>> rows;  // cell kinds, 'A' for agent cell
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto place = [&](int& slot, const char* what, int cell, int ln) {
    if (slot != -1)
      throw InvalidLayoutError("line " + std::to_string(ln) + ": duplicate " + what);
    slot = cell;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<char> row;
    for (size_t i = 0; i < line.size();) {
      char c = line[i];
      if (c == 'A') {
        if (i + 2 >= line.size() || line[i + 1] != '@')
          throw InvalidLayoutError("line " + std::to_string(lineno) +
                                   ": agent cell must be written as A@<dir>");
        if (l.agent_x != -1)
          throw InvalidLayoutError("line " + std::to_string(lineno) + ": duplicate agent start");
        l.agent_dir = dir_from_char(line[i + 2], lineno);
        l.agent_x = static_cast<int>(row.size());
        l.agent_y = static_cast<int>(rows.size());
        row.push_back('.');
        i += 3;
        continue;
      }
      switch (c) {
        case '#': case '.': case 'L': case '1': case '2':
        case 'D': case 'G': case 'F': case 'S': case 'X':
          row.push_back(c);
          break;
        default:
          throw InvalidLayoutError("line " + std::to_string(lineno) + ": unknown cell '" +
                                   std::string(1, c) + "'");
      }
      ++i;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidLayoutError("layout has no rows");
  l.height = static_cast<int>(rows.size());
  l.width = static_cast<int>(rows[0].size());
  for (size_t y = 0; y < rows.size(); ++y)
    if (static_cast<int>(rows[y].size()) != l.width)
      throw InvalidLayoutError("row " + std::to_string(y + 1) + " has " +
                               std::to_string(rows[y].size()) + " cells, expected " +
                               std::to_string(l.width));
  l.terrain.assign(static_cast<size_t>(l.width) * l.height, Terrain::Floor);
  for (int y = 0; y < l.height; ++y) {
    for (int x = 0; x < l.width; ++x) {
      char c = rows[y][x];
      int cell = l.cell(x, y);
      switch (c) {
        case '#': l.terrain[cell] = Terrain::Wall; break;
        case 'L': l.terrain[cell] = Terrain::Lava; break;
        case '.': break;
        case '1': place(l.key1, "key 1", cell, y + 1); break;
        case '2': place(l.key2, "key 2", cell, y + 1); break;
        case 'D': place(l.door, "door", cell, y + 1); break;
        case 'G': place(l.goal, "goal", cell, y + 1); break;
        case 'F': place(l.fire, "fire", cell, y + 1); break;
        case 'S': place(l.survivor, "survivor", cell, y + 1); break;
        case 'X': place(l.extinguisher, "extinguisher", cell, y + 1); break;
      }
    }
  }
  if (l.agent_x == -1) throw InvalidLayoutError("layout has no agent start (A@<dir>)");
  if (l.at(l.agent_x, l.agent_y) != Terrain::Floor)
    throw InvalidLayoutError("agent start must be on floor");
  return l;
}

GridLayout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidLayoutError("cannot open layout file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_layout(buf.str());
}

int walk_distance(const GridLayout& l, int from_cell, int to_cell) {
  if (from_cell < 0 || to_cell < 0) return -1;
  std::vector<int> dist(l.terrain.size(), -1);
  std::deque<int> queue{from_cell};
  dist[from_cell] = 0;
  while (!queue.empty()) {
    int c = queue.front();
    queue.pop_front();
    if (c == to_cell) return dist[c];
    int x = c % l.width, y = c / l.width;
    for (int d = 0; d < 4; ++d) {
      int nx = x + kDx[d], ny = y + kDy[d];
      if (!l.in_bounds(nx, ny)) continue;
      int nc = l.cell(nx, ny);
      if (l.terrain[nc] == Terrain::Wall || l.terrain[nc] == Terrain::Lava) continue;
      if (dist[nc] == -1) {
        dist[nc] = dist[c] + 1;
        queue.push_back(nc);
      }
    }
  }
  return -1;
}

// ---------------------------------------------------------------------------
// DoorKeyEnv

namespace {
const std::vector<std::string> kDoorKeyAtoms = {"k1", "k2", "d", "g", "l"};
const std::vector<std::string> kSearchRescueAtoms = {"k", "d", "x", "f", "s", "g"};

void require(bool ok, const char* what) {
  if (!ok) throw InvalidLayoutError(std::string("layout invalid for this environment: ") + what);
}
}  // namespace

DoorKeyEnv::DoorKeyEnv(GridLayout layout, int max_steps)
    : layout_(std::move(layout)), max_steps_(max_steps) {
  require(layout_.key1 >= 0, "missing key 1");
  require(layout_.key2 >= 0, "missing key 2");
  require(layout_.door >= 0, "missing door");
  require(layout_.goal >= 0, "missing goal");
  require(layout_.fire < 0 && layout_.survivor < 0 && layout_.extinguisher < 0,
          "fire/survivor/extinguisher are not part of this environment");
  // The world must be solvable once the door is open.
  require(walk_distance(layout_, layout_.cell(layout_.agent_x, layout_.agent_y), layout_.goal) >= 0,
          "goal unreachable even with the door open");
  reset(0);
}

uint64_t DoorKeyEnv::reset(uint64_t) {
  s_ = State();
  s_.x = static_cast<uint8_t>(layout_.agent_x);
  s_.y = static_cast<uint8_t>(layout_.agent_y);
  s_.dir = static_cast<uint8_t>(layout_.agent_dir);
  s_.k1 = static_cast<uint8_t>(layout_.key1);
  s_.k2 = static_cast<uint8_t>(layout_.key2);
  s_.door_open = false;
  steps_ = 0;
  terminal_ = false;
  outcome_ = current_outcome();
  if (outcome_ != env::StepOutcome::Running) terminal_ = true;
  return state_key();
}

env::StepOutcome DoorKeyEnv::current_outcome() const {
  int c = layout_.cell(s_.x, s_.y);
  if (layout_.terrain[c] == Terrain::Lava) return env::StepOutcome::TerminalHazard;
  if (c == layout_.goal) return env::StepOutcome::TerminalGoal;
  return env::StepOutcome::Running;
}

bool DoorKeyEnv::cell_blocked(int x, int y) const {
  if (!layout_.in_bounds(x, y)) return true;
  int c = layout_.cell(x, y);
  if (layout_.terrain[c] == Terrain::Wall) return true;
  if (c == layout_.door && !s_.door_open) return true;
  if (s_.k1 == c || s_.k2 == c) return true;  // keys on the floor block movement
  return false;
}

env::StepResult DoorKeyEnv::step(int action) {
  if (terminal_) throw env::EpisodeOverError();
  int fx = s_.x + kDx[s_.dir], fy = s_.y + kDy[s_.dir];
  int fcell = layout_.in_bounds(fx, fy) ? layout_.cell(fx, fy) : -1;
  bool holding = s_.k1 == kHeld || s_.k2 == kHeld;
  switch (action) {
    case 0:  // forward
      if (!cell_blocked(fx, fy)) {
        s_.x = static_cast<uint8_t>(fx);
        s_.y = static_cast<uint8_t>(fy);
      }
      break;
    case 1: s_.dir = static_cast<uint8_t>((s_.dir + 3) % 4); break;  // rotate left
    case 2: s_.dir = static_cast<uint8_t>((s_.dir + 1) % 4); break;  // rotate right
    case 3:  // pickup
      if (fcell >= 0 && !holding) {
        if (s_.k1 == fcell) s_.k1 = kHeld;
        else if (s_.k2 == fcell) s_.k2 = kHeld;
      }
      break;
    case 4:  // drop
      if (fcell >= 0 && holding && layout_.terrain[fcell] == Terrain::Floor &&
          fcell != layout_.door && fcell != layout_.goal && s_.k1 != fcell && s_.k2 != fcell) {
        if (s_.k1 == kHeld) s_.k1 = static_cast<uint8_t>(fcell);
        else s_.k2 = static_cast<uint8_t>(fcell);
      }
      break;
    case 5:  // toggle
      if (fcell == layout_.door && holding) s_.door_open = !s_.door_open;
      break;
    default: throw std::out_of_range("action out of range");
  }
  ++steps_;
  outcome_ = current_outcome();
  if (outcome_ == env::StepOutcome::Running && steps_ >= max_steps_)
    outcome_ = env::StepOutcome::TerminalTimeout;
  terminal_ = outcome_ != env::StepOutcome::Running;
  return {state_key(), labels_mask(), outcome_};
}

uint64_t DoorKeyEnv::pack(const State& s) {
  return (static_cast<uint64_t>(s.x)) | (static_cast<uint64_t>(s.y) << 4) |
         (static_cast<uint64_t>(s.dir) << 8) | (static_cast<uint64_t>(s.door_open) << 10) |
         (static_cast<uint64_t>(s.k1) << 11) | (static_cast<uint64_t>(s.k2) << 19);
}

uint64_t DoorKeyEnv::state_key() const { return pack(s_); }

uint32_t DoorKeyEnv::labels_mask() const {
  uint32_t m = 0;
  int c = layout_.cell(s_.x, s_.y);
  if (s_.k1 == kHeld) m |= 1u << 0;
  if (s_.k2 == kHeld) m |= 1u << 1;
  if (s_.door_open) m |= 1u << 2;
  if (c == layout_.goal) m |= 1u << 3;
  if (layout_.terrain[c] == Terrain::Lava) m |= 1u << 4;
  return m;
}

const std::vector<std::string>& DoorKeyEnv::atoms() const { return kDoorKeyAtoms; }

std::unique_ptr<env::LabeledMdp> DoorKeyEnv::clone() const {
  return std::make_unique<DoorKeyEnv>(*this);
}

void DoorKeyEnv::set_state(const State& s) {
  s_ = s;
  steps_ = 0;
  outcome_ = current_outcome();
  terminal_ = outcome_ != env::StepOutcome::Running;
}

// ---------------------------------------------------------------------------
// SearchRescueEnv

SearchRescueEnv::SearchRescueEnv(GridLayout layout, int max_steps)
    : layout_(std::move(layout)), max_steps_(max_steps) {
  require(layout_.key1 >= 0, "missing key (use '1')");
  require(layout_.key2 < 0, "key 2 is not part of this environment");
  require(layout_.door >= 0, "missing door");
  require(layout_.goal >= 0, "missing goal");
  require(layout_.fire >= 0, "missing fire");
  require(layout_.survivor >= 0, "missing survivor");
  require(layout_.extinguisher >= 0, "missing extinguisher");
  reset(0);
}

uint64_t SearchRescueEnv::reset(uint64_t) {
  s_ = State();
  s_.x = static_cast<uint8_t>(layout_.agent_x);
  s_.y = static_cast<uint8_t>(layout_.agent_y);
  s_.dir = static_cast<uint8_t>(layout_.agent_dir);
  s_.key = static_cast<uint8_t>(layout_.key1);
  s_.ext = static_cast<uint8_t>(layout_.extinguisher);
  s_.door_open = false;
  s_.fire_out = false;
  s_.rescued = false;
  steps_ = 0;
  terminal_ = false;
  outcome_ = current_outcome();
  if (outcome_ != env::StepOutcome::Running) terminal_ = true;
  return state_key();
}

env::StepOutcome SearchRescueEnv::current_outcome() const {
  if (layout_.cell(s_.x, s_.y) == layout_.goal) return env::StepOutcome::TerminalGoal;
  return env::StepOutcome::Running;
}

bool SearchRescueEnv::cell_blocked(int x, int y) const {
  if (!layout_.in_bounds(x, y)) return true;
  int c = layout_.cell(x, y);
  if (layout_.terrain[c] == Terrain::Wall) return true;
  if (c == layout_.door && !s_.door_open) return true;
  if (s_.key == c || s_.ext == c) return true;
  if (c == layout_.fire && !s_.fire_out) return true;
  if (c == layout_.survivor) return true;
  return false;
}

env::StepResult SearchRescueEnv::step(int action) {
  if (terminal_) throw env::EpisodeOverError();
  int fx = s_.x + kDx[s_.dir], fy = s_.y + kDy[s_.dir];
  int fcell = layout_.in_bounds(fx, fy) ? layout_.cell(fx, fy) : -1;
  bool holding = s_.key == kHeld || s_.ext == kHeld;
  switch (action) {
    case 0:
      if (!cell_blocked(fx, fy)) {
        s_.x = static_cast<uint8_t>(fx);
        s_.y = static_cast<uint8_t>(fy);
      }
      break;
    case 1: s_.dir = static_cast<uint8_t>((s_.dir + 3) % 4); break;
    case 2: s_.dir = static_cast<uint8_t>((s_.dir + 1) % 4); break;
    case 3:  // pickup
      if (fcell >= 0 && !holding) {
        if (s_.key == fcell) s_.key = kHeld;
        else if (s_.ext == fcell) s_.ext = kHeld;
      }
      break;
    case 4:  // drop
      if (fcell >= 0 && holding && layout_.terrain[fcell] == Terrain::Floor &&
          fcell != layout_.door && fcell != layout_.goal && fcell != layout_.fire &&
          fcell != layout_.survivor && s_.key != fcell && s_.ext != fcell) {
        if (s_.key == kHeld) s_.key = static_cast<uint8_t>(fcell);
        else s_.ext = static_cast<uint8_t>(fcell);
      }
      break;
    case 5:  // toggle
      if (fcell == layout_.door && s_.key == kHeld) s_.door_open = !s_.door_open;
      break;
    case 6:  // use
      if (fcell == layout_.fire && !s_.fire_out && s_.ext == kHeld) s_.fire_out = true;
      else if (fcell == layout_.survivor && !s_.rescued) s_.rescued = true;
      break;
    default: throw std::out_of_range("action out of range");
  }
  ++steps_;
  outcome_ = current_outcome();
  if (outcome_ == env::StepOutcome::Running && steps_ >= max_steps_)
    outcome_ = env::StepOutcome::TerminalTimeout;
  terminal_ = outcome_ != env::StepOutcome::Running;
  return {state_key(), labels_mask(), outcome_};
}

uint64_t SearchRescueEnv::pack(const State& s) {
  return (static_cast<uint64_t>(s.x)) | (static_cast<uint64_t>(s.y) << 4) |
         (static_cast<uint64_t>(s.dir) << 8) | (static_cast<uint64_t>(s.door_open) << 10) |
         (static_cast<uint64_t>(s.fire_out) << 11) | (static_cast<uint64_t>(s.rescued) << 12) |
         (static_cast<uint64_t>(s.key) << 13) | (static_cast<uint64_t>(s.ext) << 21);
}

uint64_t SearchRescueEnv::state_key() const { return pack(s_); }

uint32_t SearchRescueEnv::labels_mask() const {
  uint32_t m = 0;
  if (s_.key == kHeld) m |= 1u << 0;
  if (s_.door_open) m |= 1u << 1;
  if (s_.ext == kHeld) m |= 1u << 2;
  if (s_.fire_out) m |= 1u << 3;
  if (s_.rescued) m |= 1u << 4;
  if (layout_.cell(s_.x, s_.y) == layout_.goal) m |= 1u << 5;
  return m;
}

const std::vector<std::string>& SearchRescueEnv::atoms() const { return kSearchRescueAtoms; }

std::unique_ptr<env::LabeledMdp> SearchRescueEnv::clone() const {
  return std::make_unique<SearchRescueEnv>(*this);
}

void SearchRescueEnv::set_state(const State& s) {
  s_ = s;
  steps_ = 0;
  outcome_ = current_outcome();
  terminal_ = outcome_ != env::StepOutcome::Running;
}

std::unique_ptr<env::LabeledMdp> make_env(const std::string& name, const GridLayout& layout,
                                          int max_steps) {
  if (name == "doorkey") return std::make_unique<DoorKeyEnv>(layout, max_steps);
  if (name == "search_rescue") return std::make_unique<SearchRescueEnv>(layout, max_steps);
  throw std::invalid_argument("unknown environment: " + name);
}

}  // namespace lsts::grid
