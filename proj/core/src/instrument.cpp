#include "smpler/instrument.hpp"

#include <algorithm>

#include "smpler/errors.hpp"

namespace smpler {

namespace {
thread_local CostCollector* t_collector = nullptr;
thread_local MemoryStats t_memory;
}  // namespace

std::string_view category_name(CostCategory c) {
  switch (c) {
    case CostCategory::kOther: return "other";
    case CostCategory::kProjection: return "projection";
    case CostCategory::kInteraction: return "interaction";
    case CostCategory::kSoftmax: return "softmax";
    case CostCategory::kMlp: return "mlp";
    case CostCategory::kCount: break;
  }
  return "unknown";
}

std::uint64_t CostCounters::total_flops() const {
  std::uint64_t s = 0;
  for (auto f : flops) s += f;
  return s;
}

std::uint64_t CostCounters::core_flops() const {
  return flops_in(CostCategory::kInteraction) + flops_in(CostCategory::kSoftmax);
}

void CostCollector::add_flops(std::uint64_t n) {
  counters_.flops[static_cast<std::size_t>(category)] += n;
}

void CostCollector::add_keys(std::uint64_t vectors, std::uint64_t width) {
  counters_.key_vectors += vectors;
  counters_.key_bytes += vectors * width * sizeof(double);
  counters_.attention_calls += 1;
}

CostCollector* active_collector() { return t_collector; }

CollectorScope::CollectorScope(CostCollector& c) : previous_(t_collector) { t_collector = &c; }
CollectorScope::~CollectorScope() { t_collector = previous_; }

CategoryScope::CategoryScope(CostCategory c) : previous_(CostCategory::kOther) {
  if (t_collector) {
    previous_ = t_collector->category;
    t_collector->category = c;
  }
}

CategoryScope::~CategoryScope() {
  if (t_collector) t_collector->category = previous_;
}

MemoryStats& memory_stats() { return t_memory; }

MemoryScope::MemoryScope(std::size_t budget_bytes)
    : baseline_(t_memory.live_bytes),
      previous_budget_(t_memory.budget_bytes),
      previous_peak_(t_memory.peak_bytes) {
  t_memory.peak_bytes = t_memory.live_bytes;
  if (budget_bytes != std::numeric_limits<std::size_t>::max()) {
    t_memory.budget_bytes = std::min(previous_budget_, baseline_ + budget_bytes);
  }
}

MemoryScope::~MemoryScope() {
  t_memory.budget_bytes = previous_budget_;
  t_memory.peak_bytes = std::max(previous_peak_, t_memory.peak_bytes);
}

std::size_t MemoryScope::peak_bytes() const {
  return t_memory.peak_bytes > baseline_ ? t_memory.peak_bytes - baseline_ : 0;
}

void note_allocation(std::size_t bytes) {
  const std::size_t next = t_memory.live_bytes + bytes;
  if (next > t_memory.budget_bytes) throw MemoryBudgetError(next, t_memory.budget_bytes);
  t_memory.live_bytes = next;
  t_memory.peak_bytes = std::max(t_memory.peak_bytes, next);
}

void note_deallocation(std::size_t bytes) noexcept {
  t_memory.live_bytes = bytes > t_memory.live_bytes ? 0 : t_memory.live_bytes - bytes;
}

}  // namespace smpler
