#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sarlv {

enum class Propulsion { wheeled, tracked, none };
enum class Amphibious { yes, no, not_applicable };

const char* propulsion_name(Propulsion p);
const char* amphibious_name(Amphibious a);

/// One of the 11 target types. Captions are fixed fixture strings; attributes
/// are transcribed once alongside them, never parsed out of the caption at
/// runtime.
struct TargetClass {
    std::string name;  // Wikipedia-convention vehicle name
    std::string caption;
    Propulsion propulsion;
    Amphibious amphibious;
    std::string role;
    std::string serial;      // reproducibility metadata
    std::string collection;  // source collection tag
};

const std::vector<TargetClass>& target_classes();
const TargetClass& class_by_name(const std::string& name);  // throws on unknown
bool is_known_class(const std::string& name);

std::string caption_for(const std::string& class_name);
const TargetClass& attributes_for(const std::string& class_name);

struct VqaPair {
    std::string question;
    std::string answer;
};

/// The two attribute probes plus the classification question. Probes whose
/// attribute is n/a for the class (including propulsion "none" for the
/// wheeled-or-tracked question) are omitted.
std::vector<VqaPair> make_vqa_pairs(const std::string& class_name);

inline constexpr const char* kClassificationQuestion = "What vehicle is this?";
inline constexpr const char* kCaptioningQuestion = "Describe the vehicle in this image.";
inline constexpr const char* kPropulsionQuestion = "Is this vehicle wheeled or tracked?";
inline constexpr const char* kAmphibiousQuestion = "Is this vehicle amphibious?";

/// Emit the caption/attribute fixture as JSON (one object per class).
void write_classes_json(const std::filesystem::path& file);

}  // namespace sarlv
