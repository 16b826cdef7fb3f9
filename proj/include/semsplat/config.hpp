#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "semsplat/dataset_io.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/slam_pipeline.hpp"

namespace semsplat {

/// Malformed config text or an unknown key. The message starts with "source:line:".
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Raw `section.key = value` pairs. `#` starts a comment; blank lines are ignored.
struct KeyValues {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::string source;
    std::map<std::string, Entry> entries;
};

KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues load_key_values(const std::filesystem::path& path);

/// Everything a config file can set. Sections: synth, tracking, mapping, graph, pipeline.
struct RunConfig {
    SynthConfig synth;
    PipelineConfig pipeline;
};

/// Overlays the given keys on `base`. Unknown keys and unparsable values throw ConfigError.
RunConfig apply_config(const KeyValues& kv, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, one per line, in a form apply_config accepts.
std::string format_config(const RunConfig& cfg);

}  // namespace semsplat
