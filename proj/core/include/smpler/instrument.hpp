#pragma once

// Per-thread cost accounting: flop counters fed by the tensor ops and a
// live/peak byte tracker fed by the tensor allocator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <string_view>

namespace smpler {

/// Which term of the attention cost a counted operation belongs to.
enum class CostCategory : std::uint8_t {
  kOther = 0,
  kProjection,   // Q/K/V/output projections
  kInteraction,  // token-pair terms: logits and the weighted sum of values
  kSoftmax,      // exp + normalization of the attention weights
  kMlp,          // position-wise feed-forward
  kCount
};

std::string_view category_name(CostCategory c);

struct CostCounters {
  std::array<std::uint64_t, static_cast<std::size_t>(CostCategory::kCount)> flops{};
  std::uint64_t key_vectors = 0;  // key rows consumed by attention calls
  std::uint64_t key_bytes = 0;    // key_vectors * width * sizeof(double)
  std::uint64_t attention_calls = 0;

  std::uint64_t total_flops() const;
  /// Token-interaction terms (logits, softmax, weighted sum).
  std::uint64_t core_flops() const;
  std::uint64_t flops_in(CostCategory c) const { return flops[static_cast<std::size_t>(c)]; }
};

/// Sink for counted costs. Install one with CollectorScope; ops running on
/// the same thread report into it.
class CostCollector {
 public:
  void add_flops(std::uint64_t n);
  void add_keys(std::uint64_t vectors, std::uint64_t width);
  const CostCounters& counters() const { return counters_; }
  void reset() { counters_ = {}; }

  CostCategory category = CostCategory::kOther;

 private:
  CostCounters counters_;
};

/// Active collector of this thread, or nullptr.
CostCollector* active_collector();

class CollectorScope {
 public:
  explicit CollectorScope(CostCollector& c);
  ~CollectorScope();
  CollectorScope(const CollectorScope&) = delete;
  CollectorScope& operator=(const CollectorScope&) = delete;

 private:
  CostCollector* previous_;
};

/// Tags flops reported inside the scope with a cost category.
class CategoryScope {
 public:
  explicit CategoryScope(CostCategory c);
  ~CategoryScope();
  CategoryScope(const CategoryScope&) = delete;
  CategoryScope& operator=(const CategoryScope&) = delete;

 private:
  CostCategory previous_;
};

inline void count_flops(std::uint64_t n) {
  if (auto* c = active_collector()) c->add_flops(n);
}

/// Thread-local accounting of bytes held by tensor storage.
struct MemoryStats {
  std::size_t live_bytes = 0;
  std::size_t peak_bytes = 0;
  std::size_t budget_bytes = std::numeric_limits<std::size_t>::max();
};

MemoryStats& memory_stats();

/// Resets the high-water mark to the current live size for the scope's
/// lifetime and optionally imposes a budget. Restores the previous budget on exit.
class MemoryScope {
 public:
  explicit MemoryScope(std::size_t budget_bytes = std::numeric_limits<std::size_t>::max());
  ~MemoryScope();
  MemoryScope(const MemoryScope&) = delete;
  MemoryScope& operator=(const MemoryScope&) = delete;

  /// Peak bytes above the live size at scope entry.
  std::size_t peak_bytes() const;

 private:
  std::size_t baseline_;
  std::size_t previous_budget_;
  std::size_t previous_peak_;
};

void note_allocation(std::size_t bytes);
void note_deallocation(std::size_t bytes) noexcept;

/// std::allocator replacement that reports to memory_stats().
template <typename T>
struct TrackingAllocator {
  using value_type = T;
  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    note_allocation(n * sizeof(T));
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    note_deallocation(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }
  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

}  // namespace smpler
