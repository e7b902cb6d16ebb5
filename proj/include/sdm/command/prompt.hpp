#pragma once

// Chain-of-thought prompt for LLM command parsing. Rendering is a pure
// function of (text, template version).

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "sdm/command/structured.hpp"
#include "sdm/error.hpp"

namespace sdm {

inline constexpr std::string_view kPromptVersion = "cot-v1";

inline std::vector<std::string> prompt_versions() { return {std::string(kPromptVersion)}; }

namespace detail {

inline constexpr std::string_view kCotV1Glossary = R"(You translate a CAD designer's edit instruction into structured operations for a direct-modeling engine.

Glossary
- Feature: a named group of boundary faces cut into the stock. Recognized types:
  rect_through_slot (rectangular slot open at both ends), rect_blind_slot (rectangular slot with a closed end),
  triangular_slot (V-shaped slot), circular_through_hole, circular_blind_hole (hole with a bottom face),
  rect_pocket (closed rectangular recess), step (shoulder cut along one edge), side_notch (rectangular cut into a side).
  When the designer names only a family, use "slot" or "hole".
- Move: translate the feature's faces along one axis by a distance in millimeters.
- Rotate: turn the feature's faces about an axis through their centroid; positive angles follow the right-hand rule.
- Delete: remove the feature's faces. It has no parameters.
- Resize: scale the feature's faces about their centroid by a factor (1.2 = 20% larger).
- Axes: right = +X, left = -X, forward = +Y, back = -Y, up = +Z, down = -Z. An explicitly named axis wins;
  a direction word then only sets the sign. Clockwise means a negative angle.
)";

inline constexpr std::string_view kCotV1Steps = R"(Work through the instruction in this order:
[STEP 1] Feature types: list every feature the instruction refers to and map each to one recognized type. A pronoun such as "it" refers to the previous feature. Keep a distinguishing adjective ("front", "small") as a hint.
[STEP 2] Operation types: for each feature, in the order spoken, decide whether it is a move, rotate, delete or resize.
[STEP 3] Parameters: extract the axis, sign and distance_mm for a move; the axis and angle_deg for a rotate; the factor for a resize; nothing for a delete. Convert units to millimeters and degrees, percentages to factors.
[STEP 4] JSON: write the result as a single JSON object that follows the schema below. Numbers are plain decimals without units.
[STEP 5] Verification: re-read the original instruction and confirm that every feature, operation, direction and value in your JSON matches what the designer asked for; set "verified" to true only when it does.
)";

inline constexpr std::string_view kCotV1Examples = R"(Examples

Instruction: rotate the step 90 degrees about the Z axis, then move it 4 mm to the right
Features: step; the second clause says "it", which is the step again.
Operations: rotate, then move.
Parameters: rotate axis Z, angle 90; move along +X (right), 4 mm.
Output: {"commands":[{"feature":{"type":"step"},"operation":{"type":"rotate","parameters":{"axis":"Z","angle_deg":90}}},{"feature":{"type":"step"},"operation":{"type":"move","parameters":{"axis":"X","sign":"+","distance_mm":4}}}],"verified":true}
Check: two operations in spoken order, both on the step; direction and values match.

Instruction: delete the blind hole and shrink the rectangular pocket by 20%
Features: circular_blind_hole; rect_pocket.
Operations: delete, then resize.
Parameters: delete has none; shrinking by 20% leaves a factor of 0.8.
Output: {"commands":[{"feature":{"type":"circular_blind_hole"},"operation":{"type":"delete","parameters":{}}},{"feature":{"type":"rect_pocket"},"operation":{"type":"resize","parameters":{"factor":0.8}}}],"verified":true}
Check: both features are named explicitly; the factor is below 1 because the pocket shrinks.

Instruction: push the front slot 2.5 mm back, turn it 30 degrees clockwise around Y and remove the side notch
Features: slot with hint "front"; "it" is the same slot; side_notch.
Operations: move, rotate, delete.
Parameters: move along -Y (back), 2.5 mm; rotate about Y by -30 because clockwise is negative; delete has none.
Output: {"commands":[{"feature":{"type":"slot","hint":"front"},"operation":{"type":"move","parameters":{"axis":"Y","sign":"-","distance_mm":2.5}}},{"feature":{"type":"slot","hint":"front"},"operation":{"type":"rotate","parameters":{"axis":"Y","angle_deg":-30}}},{"feature":{"type":"side_notch"},"operation":{"type":"delete","parameters":{}}}],"verified":true}
Check: three operations; the hint is carried to the pronoun; signs follow the axis table.
)";

inline constexpr std::string_view kCotV1Schema = R"(Output schema
{
  "commands": [
    {
      "feature": {"type": "<recognized type or slot/hole>", "hint": "<optional adjective>"},
      "operation": {
        "type": "move" | "rotate" | "delete" | "resize",
        "parameters": move   -> {"axis": "X"|"Y"|"Z", "sign": "+"|"-", "distance_mm": <number > 0>}
                      rotate -> {"axis": "X"|"Y"|"Z", "angle_deg": <number in (-360, 360), not 0>}
                      delete -> {}
                      resize -> {"factor": <number > 0>}
      }
    }
  ],
  "verified": true | false
}
Reply with the JSON object only.
)";

}  // namespace detail

/// Glossary, the five ordered steps, worked examples, the schema and then
/// the instruction itself.
inline std::string build_cot_prompt(std::string_view text, std::string_view version = kPromptVersion) {
  if (version != kPromptVersion) throw InvalidArgument("unknown prompt template version '" + std::string(version) + "'");
  bool blank = true;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
  if (blank) throw InvalidArgument("command text is empty");
  std::string out;
  out.reserve(4096 + text.size());
  out += detail::kCotV1Glossary;
  out += '\n';
  out += detail::kCotV1Steps;
  out += '\n';
  out += detail::kCotV1Examples;
  out += '\n';
  out += detail::kCotV1Schema;
  out += "\nInstruction: ";
  out += text;
  out += '\n';
  return out;
}

/// Follow-up message sent after a reply that failed extraction or the schema.
inline std::string build_repair_prompt(const std::vector<std::string>& problems) {
  std::string out = "Your previous reply could not be used:\n";
  for (const auto& p : problems) out += "- " + p + "\n";
  out += "Reply again with one corrected JSON object that follows the output schema, and nothing else.\n";
  return out;
}

}  // namespace sdm
