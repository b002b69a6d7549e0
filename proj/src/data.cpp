#include "hieract/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "hieract/errors.hpp"

namespace hieract {

namespace {

using ordered_json = nlohmann::ordered_json;

auto event_key(const Event& e) { return std::tie(e.start, e.label, e.end); }

std::string padded_index(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    return buf;
}

template <typename V>
V field(const nlohmann::json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError(where + ": missing field '" + key + "'");
    }
    try {
        return it->get<V>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": field '" + key + "' has the wrong type (" + it->type_name() + ")");
    }
}

} // namespace

bool spans_overlap(const Event& a, const Event& b) { return a.start <= b.end && b.start <= a.end; }

std::vector<Event> canonical_events(const std::vector<Event>& events) {
    auto sorted = events;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Event& a, const Event& b) { return event_key(a) < event_key(b); });
    return sorted;
}

std::vector<std::size_t> prior_event_indices(const std::vector<Event>& events, std::int64_t segment_start,
                                             std::size_t n_past) {
    std::vector<std::size_t> done;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].end < segment_start) {
            done.push_back(i);
        }
    }
    std::stable_sort(done.begin(), done.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = events[a];
        const auto& y = events[b];
        return std::tie(x.end, x.start, x.label) < std::tie(y.end, y.start, y.label);
    });
    if (done.size() > n_past) {
        done.erase(done.begin(), done.end() - static_cast<std::ptrdiff_t>(n_past));
    }
    return done;
}

std::vector<Sample> build_samples(const std::vector<AnnotatedVideo>& videos, const LabelSpace& labels,
                                  std::size_t n_past) {
    std::vector<const AnnotatedVideo*> order;
    std::set<std::string> seen;
    for (const auto& v : videos) {
        if (!seen.insert(v.video_id).second) {
            throw ConfigError("annotations: duplicate video_id '" + v.video_id + "'");
        }
        order.push_back(&v);
    }
    std::sort(order.begin(), order.end(),
              [](const AnnotatedVideo* a, const AnnotatedVideo* b) { return a->video_id < b->video_id; });

    std::vector<Sample> samples;
    for (const auto* video : order) {
        for (std::size_t i = 0; i < video->events.size(); ++i) {
            const auto& e = video->events[i];
            std::string where = "video '" + video->video_id + "' event " + std::to_string(i);
            if (!labels.has_fine(e.label)) {
                throw ConfigError(where + ": label '" + e.label + "' is not in the vocabulary");
            }
            if (!(e.start < e.end)) {
                throw ConfigError(where + ": start_frame " + std::to_string(e.start) + " is not before end_frame " +
                                  std::to_string(e.end));
            }
        }
        auto events = canonical_events(video->events);
        for (std::size_t i = 0; i < events.size(); ++i) {
            const auto& def = events[i];
            Sample s;
            s.sample_id = video->video_id + ":" + padded_index(i);
            s.video_id = video->video_id;
            s.subject_id = video->subject_id;
            s.location = video->location;
            s.start = def.start;
            s.end = def.end;
            s.defining_label = labels.fine_index(def.label);
            s.y_fine.assign(labels.n_fine(), 0.0f);
            for (const auto& other : events) {
                if (spans_overlap(def, other)) {
                    s.y_fine[labels.fine_index(other.label)] = 1.0f;
                }
            }
            s.y_coarse = labels.coarse_targets(s.y_fine);
            for (auto p : prior_event_indices(events, def.start, n_past)) {
                s.prior_actions.push_back(labels.fine_index(events[p].label));
            }
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

bool hierarchy_consistent(const Sample& sample, const LabelSpace& labels) {
    if (sample.y_fine.size() != labels.n_fine() || sample.y_coarse.size() != labels.n_coarse()) {
        return false;
    }
    if (sample.defining_label >= labels.n_fine() || sample.y_fine[sample.defining_label] != 1.0f) {
        return false;
    }
    return labels.coarse_targets(sample.y_fine) == sample.y_coarse;
}

void SubjectPartition::validate() const {
    if (train.empty() || test.empty()) {
        throw ConfigError("subject partition needs nonempty train and test lists");
    }
    std::set<std::string> all;
    for (const auto* side : {&train, &test}) {
        std::set<std::string> here;
        for (const auto& s : *side) {
            if (!here.insert(s).second) {
                throw ConfigError("subject '" + s + "' is listed twice on one side of the split");
            }
            if (!all.insert(s).second) {
                throw ConfigError("subject '" + s + "' appears in both train and test");
            }
        }
    }
}

Split cross_subject_split(const std::vector<Sample>& samples, const SubjectPartition& partition) {
    partition.validate();
    std::set<std::string> train(partition.train.begin(), partition.train.end());
    std::set<std::string> test(partition.test.begin(), partition.test.end());
    Split split;
    for (const auto& s : samples) {
        if (train.count(s.subject_id)) {
            split.train.push_back(s);
        } else if (test.count(s.subject_id)) {
            split.test.push_back(s);
        }
    }
    return split;
}

std::vector<AnnotatedVideo> parse_annotations(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("annotations: ") + e.what());
    }
    if (!doc.is_array()) {
        throw ConfigError("annotations: top level must be an array of videos");
    }
    std::vector<AnnotatedVideo> videos;
    for (std::size_t v = 0; v < doc.size(); ++v) {
        const auto& obj = doc[v];
        std::string where = "annotations[" + std::to_string(v) + "]";
        if (!obj.is_object()) {
            throw ConfigError(where + ": expected an object");
        }
        AnnotatedVideo video;
        video.video_id = field<std::string>(obj, "video_id", where);
        video.subject_id = field<std::string>(obj, "subject_id", where);
        video.location = field<std::string>(obj, "location", where);
        video.fps = obj.contains("fps") ? field<double>(obj, "fps", where) : 25.0;
        if (!(video.fps > 0.0)) {
            throw ConfigError(where + ": fps must be positive");
        }
        auto events = field<nlohmann::json>(obj, "events", where);
        if (!events.is_array()) {
            throw ConfigError(where + ": field 'events' must be an array");
        }
        for (std::size_t i = 0; i < events.size(); ++i) {
            std::string ewhere = where + ".events[" + std::to_string(i) + "]";
            Event e;
            e.label = field<std::string>(events[i], "label", ewhere);
            e.start = field<std::int64_t>(events[i], "start", ewhere);
            e.end = field<std::int64_t>(events[i], "end", ewhere);
            if (!(e.start < e.end)) {
                throw ConfigError(ewhere + ": start " + std::to_string(e.start) + " must be before end " +
                                  std::to_string(e.end));
            }
            video.events.push_back(std::move(e));
        }
        videos.push_back(std::move(video));
    }
    return videos;
}

std::vector<AnnotatedVideo> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open annotation file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_annotations(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string format_annotations(const std::vector<AnnotatedVideo>& videos) {
    ordered_json doc = ordered_json::array();
    for (const auto& v : videos) {
        ordered_json events = ordered_json::array();
        for (const auto& e : v.events) {
            events.push_back({{"label", e.label}, {"start", e.start}, {"end", e.end}});
        }
        doc.push_back({{"video_id", v.video_id},
                       {"subject_id", v.subject_id},
                       {"location", v.location},
                       {"fps", v.fps},
                       {"events", events}});
    }
    return doc.dump(2) + "\n";
}

std::string format_sample_manifest(const std::vector<Sample>& samples, const LabelSpace& labels) {
    ordered_json doc = ordered_json::array();
    for (const auto& s : samples) {
        ordered_json fine = ordered_json::array();
        for (std::size_t f = 0; f < s.y_fine.size(); ++f) {
            if (s.y_fine[f] != 0.0f) {
                fine.push_back(labels.fine_name(f));
            }
        }
        ordered_json coarse = ordered_json::array();
        for (std::size_t c = 0; c < s.y_coarse.size(); ++c) {
            if (s.y_coarse[c] != 0.0f) {
                coarse.push_back(labels.coarse_name(c));
            }
        }
        ordered_json prior = ordered_json::array();
        for (auto p : s.prior_actions) {
            prior.push_back(labels.fine_name(p));
        }
        doc.push_back({{"sample_id", s.sample_id},
                       {"video_id", s.video_id},
                       {"subject_id", s.subject_id},
                       {"location", s.location},
                       {"start", s.start},
                       {"end", s.end},
                       {"defining_label", labels.fine_name(s.defining_label)},
                       {"fine_labels", fine},
                       {"coarse_labels", coarse},
                       {"prior_actions", prior}});
    }
    return doc.dump(2) + "\n";
}

} // namespace hieract
