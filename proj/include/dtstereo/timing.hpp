#pragma once

#include <array>
#include <chrono>
#include <string_view>

namespace dtstereo {

enum class Stage { DataTerm, Predictor, DomainTransform, Wta, LeftRightCheck };
inline constexpr int kStageCount = 5;

inline constexpr std::array<std::string_view, kStageCount> kStageNames = {
    "data term", "CNN", "domain transform", "WTA", "left-right check"};

// Wall-clock accumulator filled in by the pipeline when a caller asks for it.
struct StageTimings {
  std::array<double, kStageCount> milliseconds{};
  std::array<int, kStageCount> calls{};

  void add(Stage s, double ms) {
    milliseconds[static_cast<int>(s)] += ms;
    calls[static_cast<int>(s)] += 1;
  }
};

// Adds the scope's duration to `timings` (if non-null) on destruction.
class ScopedStage {
 public:
  ScopedStage(StageTimings* timings, Stage stage)
      : timings_(timings), stage_(stage), start_(std::chrono::steady_clock::now()) {}
  ~ScopedStage() {
    if (!timings_) return;
    const auto end = std::chrono::steady_clock::now();
    timings_->add(stage_, std::chrono::duration<double, std::milli>(end - start_).count());
  }
  ScopedStage(const ScopedStage&) = delete;
  ScopedStage& operator=(const ScopedStage&) = delete;

 private:
  StageTimings* timings_;
  Stage stage_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace dtstereo
