#include "sarlv/classes.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sarlv {

const char* propulsion_name(Propulsion p) {
    switch (p) {
        case Propulsion::wheeled: return "wheeled";
        case Propulsion::tracked: return "tracked";
        case Propulsion::none: return "none";
    }
    return "none";
}

const char* amphibious_name(Amphibious a) {
    switch (a) {
        case Amphibious::yes: return "yes";
        case Amphibious::no: return "no";
        case Amphibious::not_applicable: return "n/a";
    }
    return "n/a";
}

const std::vector<TargetClass>& target_classes() {
    static const std::vector<TargetClass> classes = {
        {"2S1", "2S1, a tracked amphibious self-propelled howitzer artillery",
         Propulsion::tracked, Amphibious::yes, "self-propelled howitzer artillery", "B01", "2-1"},
        {"BMP-2", "BMP-2, a tracked amphibious infantry fighting vehicle", Propulsion::tracked,
         Amphibious::yes, "infantry fighting vehicle", "C21", "1-1"},
        {"BRDM-2", "BRDM-2, a wheeled amphibious armored scout car", Propulsion::wheeled,
         Amphibious::yes, "armored scout car", "E-71", "2-1"},
        {"BTR-60", "BTR-60, a wheeled amphibious armored personnel carrier", Propulsion::wheeled,
         Amphibious::yes, "armored personnel carrier", "K10YT7532", "1-1"},
        {"BTR-70", "BTR-70, a wheeled amphibious armored personnel carrier", Propulsion::wheeled,
         Amphibious::yes, "armored personnel carrier", "C71", "1-1"},
        {"D7", "D7, a tracked medium tractor bulldozer", Propulsion::tracked, Amphibious::no,
         "tractor bulldozer", "92V13015", "2-1"},
        {"SLICY", "SLICY, a simple geometric-shaped static target", Propulsion::none,
         Amphibious::not_applicable, "static target", "SN-1", "2-1"},
        {"T-62", "T-62, a tracked medium main battle tank", Propulsion::tracked, Amphibious::no,
         "main battle tank", "A51", "2-1"},
        {"T-72", "T-72, a tracked medium main battle tank", Propulsion::tracked, Amphibious::no,
         "main battle tank", "A64", "2-1"},
        {"ZIL-131", "ZIL-131, a wheeled general-purpose truck", Propulsion::wheeled,
         Amphibious::no, "general-purpose truck", "E12", "2-1"},
        {"ZSU-23-4", "ZSU-23-4, a tracked self-propelled anti-aircraft weapon",
         Propulsion::tracked, Amphibious::no, "self-propelled anti-aircraft weapon", "D08",
         "2-1"},
    };
    return classes;
}

const TargetClass& class_by_name(const std::string& name) {
    for (const auto& c : target_classes()) {
        if (c.name == name) return c;
    }
    throw std::invalid_argument("unknown target class \"" + name + "\"");
}

bool is_known_class(const std::string& name) {
    for (const auto& c : target_classes()) {
        if (c.name == name) return true;
    }
    return false;
}

std::string caption_for(const std::string& class_name) { return class_by_name(class_name).caption; }

const TargetClass& attributes_for(const std::string& class_name) {
    return class_by_name(class_name);
}

std::vector<VqaPair> make_vqa_pairs(const std::string& class_name) {
    const auto& cls = class_by_name(class_name);
    std::vector<VqaPair> pairs;
    if (cls.propulsion != Propulsion::none) {
        pairs.push_back({kPropulsionQuestion, propulsion_name(cls.propulsion)});
    }
    if (cls.amphibious != Amphibious::not_applicable) {
        pairs.push_back({kAmphibiousQuestion, amphibious_name(cls.amphibious)});
    }
    pairs.push_back({kClassificationQuestion, cls.name});
    return pairs;
}

void write_classes_json(const std::filesystem::path& file) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : target_classes()) {
        out.push_back({{"name", c.name},
                       {"caption", c.caption},
                       {"propulsion", propulsion_name(c.propulsion)},
                       {"amphibious", amphibious_name(c.amphibious)},
                       {"role", c.role},
                       {"serial", c.serial},
                       {"collection", c.collection}});
    }
    std::ofstream f(file);
    if (!f) throw std::runtime_error("write_classes_json: cannot open " + file.string());
    f << out.dump(2) << "\n";
}

}  // namespace sarlv
