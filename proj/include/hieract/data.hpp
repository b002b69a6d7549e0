#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hieract/labels.hpp"

namespace hieract {

/// One annotated action. Frame spans are inclusive: [start, end].
struct Event {
    std::string label;
    std::int64_t start = 0;
    std::int64_t end = 0;
};

struct AnnotatedVideo {
    std::string video_id;
    std::string subject_id;
    std::string location;
    double fps = 25.0;
    std::vector<Event> events;
};

/// One trimmed segment: the span of its defining event.
struct Sample {
    std::string sample_id; // "{video_id}:{index}" with the event's canonical index
    std::string video_id;
    std::string subject_id;
    std::string location;
    std::int64_t start = 0;
    std::int64_t end = 0;
    std::size_t defining_label = 0;
    std::vector<float> y_fine;                // 0/1 per fine class
    std::vector<float> y_coarse;              // OR-image of y_fine
    std::vector<std::size_t> prior_actions;   // fine indices, oldest first
};

/// At least one frame in common.
bool spans_overlap(const Event& a, const Event& b);

/// Indices of the n_past events of `events` that end strictly before
/// `segment_start`, picking the latest by (end, start, label) and returning
/// them oldest first.
std::vector<std::size_t> prior_event_indices(const std::vector<Event>& events, std::int64_t segment_start,
                                             std::size_t n_past);

/// Events sorted by (start, label, end).
std::vector<Event> canonical_events(const std::vector<Event>& events);

/// One sample per event, ordered by (video_id, start, label). Unknown labels
/// and bad spans throw ConfigError naming the video and event index.
std::vector<Sample> build_samples(const std::vector<AnnotatedVideo>& videos, const LabelSpace& labels,
                                  std::size_t n_past);

/// Exact check of y_coarse == OR-image of y_fine and the defining bit.
bool hierarchy_consistent(const Sample& sample, const LabelSpace& labels);

struct SubjectPartition {
    std::vector<std::string> train;
    std::vector<std::string> test;

    /// Both sides nonempty, no duplicates, no subject on both sides.
    void validate() const;
};

struct Split {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

/// Samples whose subject is in neither list are dropped.
Split cross_subject_split(const std::vector<Sample>& samples, const SubjectPartition& partition);

/// Annotation document: a JSON array of
/// {video_id, subject_id, location, fps, events: [{label, start, end}]}.
std::vector<AnnotatedVideo> parse_annotations(std::string_view json_text);
std::vector<AnnotatedVideo> load_annotations(const std::filesystem::path& path);
std::string format_annotations(const std::vector<AnnotatedVideo>& videos);

/// Deterministic sample manifest (JSON text, fixed key order).
std::string format_sample_manifest(const std::vector<Sample>& samples, const LabelSpace& labels);

} // namespace hieract
