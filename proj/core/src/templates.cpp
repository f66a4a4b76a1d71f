#include "molang/tasks.hpp"

namespace molang {

namespace {

struct Row {
    TaskKind task;
    const char* in;
    const char* out;
};

constexpr const char* kMotionOut = "<motion_tokens>";
constexpr const char* kCaptionOut = "[caption]";

// The first rows of each task reproduce published prompt wordings verbatim,
// including their spacing quirks; the rest are paraphrases. Hyphenated
// placeholder constructs ("[frames]-frame") are avoided so every rendered
// word stays in the text vocabulary.
const Row kRows[] = {
    // ---- text to motion ----
    {TaskKind::TextToMotion, "Give me a motion that corresponds to [caption].", kMotionOut},
    {TaskKind::TextToMotion, "Demonstrate a sequence of movements that depict [caption].", kMotionOut},
    {TaskKind::TextToMotion, "I need a human motion that conveys [caption]. Can you generate it for me?", kMotionOut},
    {TaskKind::TextToMotion, "Can you generate a motion sequence that depicts '[caption]'?", kMotionOut},
    {TaskKind::TextToMotion, "Generate a motion matching the description: [caption]", kMotionOut},
    {TaskKind::TextToMotion, "Create a human motion for the caption '[caption]'.", kMotionOut},
    {TaskKind::TextToMotion, "Produce a body movement sequence described by [caption]", kMotionOut},
    {TaskKind::TextToMotion, "Act out the following: [caption]", kMotionOut},
    {TaskKind::TextToMotion, "Synthesize a motion clip that shows [caption]", kMotionOut},
    {TaskKind::TextToMotion, "Please turn this description into motion: [caption]", kMotionOut},
    {TaskKind::TextToMotion, "Show the movement described as [caption].", kMotionOut},

    // ---- text to motion, length-conditioned ----
    {TaskKind::TextToMotionWithLength,
     "Give me a motion that lasts for approximately [frames] frames. The caption is: [caption].", kMotionOut},
    {TaskKind::TextToMotionWithLength, "Please create a motion that lasts [seconds] seconds and illustrates [caption].",
     kMotionOut},
    {TaskKind::TextToMotionWithLength, "Generate a motion of [frames] frames for the caption [caption].", kMotionOut},
    {TaskKind::TextToMotionWithLength, "I want a motion of [seconds] seconds showing [caption].", kMotionOut},
    {TaskKind::TextToMotionWithLength, "Produce a movement lasting [frames] frames that depicts [caption].", kMotionOut},
    {TaskKind::TextToMotionWithLength, "Make a motion for [caption], around [seconds] seconds long.", kMotionOut},
    {TaskKind::TextToMotionWithLength, "Create motion content with a duration of [frames] frames matching [caption].",
     kMotionOut},
    {TaskKind::TextToMotionWithLength, "Within [seconds] seconds, show [caption].", kMotionOut},
    {TaskKind::TextToMotionWithLength, "Give a motion spanning [frames] frames illustrating [caption].", kMotionOut},
    {TaskKind::TextToMotionWithLength, "Animate [caption] over [seconds] seconds.", kMotionOut},

    // ---- length to motion ----
    {TaskKind::LengthToMotion, "Show me a motion that lasts for no more than [frames] frames.", kMotionOut},
    {TaskKind::LengthToMotion, "Create a motion that has a duration of [seconds] seconds.", kMotionOut},
    {TaskKind::LengthToMotion, "Generate any motion lasting [frames] frames.", kMotionOut},
    {TaskKind::LengthToMotion, "Produce a movement that runs for about [seconds] seconds.", kMotionOut},
    {TaskKind::LengthToMotion, "Give me a human motion of [frames] frames, your choice.", kMotionOut},
    {TaskKind::LengthToMotion, "Invent a motion whose length is [seconds] seconds.", kMotionOut},
    {TaskKind::LengthToMotion, "Make up a body motion spanning [frames] frames.", kMotionOut},
    {TaskKind::LengthToMotion, "I need some motion that takes [seconds] seconds.", kMotionOut},
    {TaskKind::LengthToMotion, "Any motion is fine as long as it is [frames] frames long.", kMotionOut},
    {TaskKind::LengthToMotion, "Perform a movement for a duration of [seconds] seconds.", kMotionOut},

    // ---- unconstrained motion ----
    {TaskKind::RandomMotion, "Give me motions as you like.", kMotionOut},
    {TaskKind::RandomMotion, "Produce actions that are not prescribed.", kMotionOut},
    {TaskKind::RandomMotion, "Generate a random human motion.", kMotionOut},
    {TaskKind::RandomMotion, "Show me any movement you can think of.", kMotionOut},
    {TaskKind::RandomMotion, "Improvise a motion sequence.", kMotionOut},
    {TaskKind::RandomMotion, "Create an arbitrary body motion.", kMotionOut},
    {TaskKind::RandomMotion, "Surprise me with a motion.", kMotionOut},
    {TaskKind::RandomMotion, "Make a human move in any way.", kMotionOut},
    {TaskKind::RandomMotion, "Output a motion of your own choosing.", kMotionOut},
    {TaskKind::RandomMotion, "Do whatever movement comes to mind.", kMotionOut},

    // ---- motion to text ----
    {TaskKind::MotionToText, "Give me a summary of the motion being displayed in [motion] using words.", kCaptionOut},
    {TaskKind::MotionToText, "Describe the motion illustrated in [motion] in natural language.", kCaptionOut},
    {TaskKind::MotionToText, "Provide an accurate caption describing the motion of <motion_tokens>", kCaptionOut},
    {TaskKind::MotionToText, "What is happening in [motion]?", kCaptionOut},
    {TaskKind::MotionToText, "Write a caption for [motion].", kCaptionOut},
    {TaskKind::MotionToText, "Explain the movement shown in [motion].", kCaptionOut},
    {TaskKind::MotionToText, "Put the motion [motion] into words.", kCaptionOut},
    {TaskKind::MotionToText, "Caption this motion: [motion]", kCaptionOut},
    {TaskKind::MotionToText, "Tell me what the person is doing in [motion].", kCaptionOut},
    {TaskKind::MotionToText, "Summarize [motion] as text.", kCaptionOut},

    // ---- motion to text, length-aware ----
    {TaskKind::MotionToTextWithLength, "Describe the movement portrayed in [motion]that lasts [frames] frames.",
     kCaptionOut},
    {TaskKind::MotionToTextWithLength, "What is happening in [motion] for a length of [seconds] seconds?", kCaptionOut},
    {TaskKind::MotionToTextWithLength, "Caption the motion of [frames] frames: [motion]", kCaptionOut},
    {TaskKind::MotionToTextWithLength, "Describe [motion], which spans [seconds] seconds.", kCaptionOut},
    {TaskKind::MotionToTextWithLength, "The motion [motion] is [frames] frames long. What does it show?", kCaptionOut},
    {TaskKind::MotionToTextWithLength, "Over [seconds] seconds, what does [motion] depict?", kCaptionOut},
    {TaskKind::MotionToTextWithLength, "Give words for the sequence of [frames] frames in [motion].", kCaptionOut},
    {TaskKind::MotionToTextWithLength, "Summarize the movement of [seconds] seconds in [motion].", kCaptionOut},
    {TaskKind::MotionToTextWithLength, "Explain what happens during the [frames] frames of [motion].", kCaptionOut},
    {TaskKind::MotionToTextWithLength, "In [seconds] seconds of [motion], what is the person doing?", kCaptionOut},

    // ---- motion to length ----
    {TaskKind::MotionToLength, "What is the duration of [motion]'s gestures in frames?",
     "There are [frames] frames in the motion."},
    {TaskKind::MotionToLength, "What is the total duration of  [motion]'s body movements in seconds?",
     "The motion lasts for [seconds] seconds."},
    {TaskKind::MotionToLength, "How many frames does [motion] contain?", "There are [frames] frames in the motion."},
    {TaskKind::MotionToLength, "How long is [motion] in seconds?", "The motion lasts for [seconds] seconds."},
    {TaskKind::MotionToLength, "Count the frames of [motion].", "It has [frames] frames."},
    {TaskKind::MotionToLength, "Give the duration of [motion] in seconds.", "It lasts [seconds] seconds."},
    {TaskKind::MotionToLength, "What's the frame count of [motion]?", "The frame count is [frames]."},
    {TaskKind::MotionToLength, "State the length of [motion] in seconds.", "The length is [seconds] seconds."},
    {TaskKind::MotionToLength, "Tell me how many frames [motion] runs for.", "It runs for [frames] frames."},
    {TaskKind::MotionToLength, "Measure the duration of [motion] in seconds.", "Its duration is [seconds] seconds."},

    // ---- caption to length ----
    {TaskKind::CaptionToLength, "How many frames are expected for the motion that matches [caption]?",
     "The duration is estimated to be around [frames] frames."},
    {TaskKind::CaptionToLength, "Given [caption], provide the anticipated second duration for the corresponding motion.",
     "The motion has a length of [seconds] seconds."},
    {TaskKind::CaptionToLength, "Estimate the frame count for [caption].", "Around [frames] frames."},
    {TaskKind::CaptionToLength, "How many seconds would [caption] take?", "About [seconds] seconds."},
    {TaskKind::CaptionToLength, "Predict the duration in frames of a motion described by [caption].",
     "Roughly [frames] frames."},
    {TaskKind::CaptionToLength, "For the caption [caption], how long in seconds?", "Approximately [seconds] seconds."},
    {TaskKind::CaptionToLength, "Guess the number of frames needed for [caption].", "An estimated [frames] frames."},
    {TaskKind::CaptionToLength, "What second duration fits [caption]?", "It should last [seconds] seconds."},
    {TaskKind::CaptionToLength, "Expected frames for [caption]?", "Expect about [frames] frames."},
    {TaskKind::CaptionToLength, "Time estimate in seconds for [caption]?", "Close to [seconds] seconds."},

    // ---- length to caption ----
    {TaskKind::LengthToCaption, "What are some possible physical gestures that could be made in [frames] frames?",
     kCaptionOut},
    {TaskKind::LengthToCaption, "What motion could be performed in [seconds] seconds?", kCaptionOut},
    {TaskKind::LengthToCaption, "Describe a motion that would fit in [frames] frames.", kCaptionOut},
    {TaskKind::LengthToCaption, "Name a movement that takes about [seconds] seconds.", kCaptionOut},
    {TaskKind::LengthToCaption, "Suggest an action lasting [frames] frames.", kCaptionOut},
    {TaskKind::LengthToCaption, "What could someone do in [seconds] seconds?", kCaptionOut},
    {TaskKind::LengthToCaption, "Give a caption for a motion of [frames] frames.", kCaptionOut},
    {TaskKind::LengthToCaption, "Invent a description for a movement of [seconds] seconds.", kCaptionOut},
    {TaskKind::LengthToCaption, "Propose a human action spanning [frames] frames.", kCaptionOut},
    {TaskKind::LengthToCaption, "What activity fills [seconds] seconds?", kCaptionOut},

    // ---- unconstrained caption ----
    {TaskKind::RandomCaption, "Depict a motion as like you have seen it.", kCaptionOut},
    {TaskKind::RandomCaption, "Describe the motion of someone randomly.", kCaptionOut},
    {TaskKind::RandomCaption, "Write any motion caption.", kCaptionOut},
    {TaskKind::RandomCaption, "Give me a random description of a movement.", kCaptionOut},
    {TaskKind::RandomCaption, "Invent a caption for some human motion.", kCaptionOut},
    {TaskKind::RandomCaption, "Describe an arbitrary action.", kCaptionOut},
    {TaskKind::RandomCaption, "Tell me about any movement you imagine.", kCaptionOut},
    {TaskKind::RandomCaption, "Produce a caption of your choosing.", kCaptionOut},
    {TaskKind::RandomCaption, "Caption an imaginary motion.", kCaptionOut},
    {TaskKind::RandomCaption, "Say what a person might be doing.", kCaptionOut},

    // ---- motion prediction ----
    {TaskKind::MotionPrediction, "Predict motion: [motion]", kMotionOut},
    {TaskKind::MotionPrediction, "Complete the motion that begins with [motion].", kMotionOut},
    {TaskKind::MotionPrediction, "Given the start [motion], continue the movement.", kMotionOut},
    {TaskKind::MotionPrediction, "Here is the beginning of a motion: [motion]. What happens next?", kMotionOut},
    {TaskKind::MotionPrediction, "Continue this motion sequence: [motion]", kMotionOut},
    {TaskKind::MotionPrediction, "Extend the motion [motion] to its natural end.", kMotionOut},
    {TaskKind::MotionPrediction, "Finish the movement started in [motion].", kMotionOut},
    {TaskKind::MotionPrediction, "The motion opens with [motion]. Generate the rest.", kMotionOut},
    {TaskKind::MotionPrediction, "Carry on from [motion].", kMotionOut},
    {TaskKind::MotionPrediction, "Predict the remainder of [motion].", kMotionOut},

    // ---- motion in-between ----
    {TaskKind::MotionInBetween, "Fill in the missing section of this motion: [motion]", kMotionOut},
    {TaskKind::MotionInBetween, "Complete the gap in [motion].", kMotionOut},
    {TaskKind::MotionInBetween, "The middle of this motion is masked: [motion]. Reconstruct it.", kMotionOut},
    {TaskKind::MotionInBetween, "Infer the motion hidden between the given parts: [motion]", kMotionOut},
    {TaskKind::MotionInBetween, "Recover the masked span in [motion].", kMotionOut},
    {TaskKind::MotionInBetween, "Provide the frames that belong in between for [motion].", kMotionOut},
    {TaskKind::MotionInBetween, "Connect the two motion fragments smoothly: [motion]", kMotionOut},
    {TaskKind::MotionInBetween, "What motion belongs in the blank of [motion]?", kMotionOut},
    {TaskKind::MotionInBetween, "Interpolate the missing movement in [motion].", kMotionOut},
    {TaskKind::MotionInBetween, "Fill the hole marked in [motion].", kMotionOut},

    // ---- free completion ----
    {TaskKind::MotionCompletionFree, "Continue this motion however you like: [motion]", kMotionOut},
    {TaskKind::MotionCompletionFree, "Freely complete the motion starting with [motion].", kMotionOut},
    {TaskKind::MotionCompletionFree, "Take the opening [motion] and finish it your way.", kMotionOut},
    {TaskKind::MotionCompletionFree, "Improvise a continuation of [motion].", kMotionOut},
    {TaskKind::MotionCompletionFree, "Extend [motion] in any plausible manner.", kMotionOut},
    {TaskKind::MotionCompletionFree, "Given [motion], keep the movement going.", kMotionOut},
    {TaskKind::MotionCompletionFree, "Complete the sequence [motion] with anything natural.", kMotionOut},
    {TaskKind::MotionCompletionFree, "Invent an ending for [motion].", kMotionOut},
    {TaskKind::MotionCompletionFree, "Pick up where [motion] leaves off.", kMotionOut},
    {TaskKind::MotionCompletionFree, "Develop [motion] into a full motion.", kMotionOut},

    // ---- duration arithmetic ----
    {TaskKind::LengthQA, "A motion has [frames] frames. How long does it last in seconds?", "It lasts [seconds] seconds."},
    {TaskKind::LengthQA, "How many seconds do [frames] frames amount to?", "[frames] frames amount to [seconds] seconds."},
    {TaskKind::LengthQA, "Convert [frames] frames to seconds.", "That is [seconds] seconds."},
    {TaskKind::LengthQA, "A clip lasts [seconds] seconds. How would you describe its length in frames?",
     "It spans [frames] frames."},
    {TaskKind::LengthQA, "If a motion runs [frames] frames, what is its duration in seconds?",
     "The duration is [seconds] seconds."},
    {TaskKind::LengthQA, "Express [seconds] seconds as a frame count.", "That equals [frames] frames."},
    {TaskKind::LengthQA, "How long, in seconds, is a motion of [frames] frames?", "It is [seconds] seconds long."},
    {TaskKind::LengthQA, "State the number of frames in a motion of [seconds] seconds.", "There are [frames] frames."},
    {TaskKind::LengthQA, "What is the second equivalent of [frames] frames?", "[seconds] seconds."},
    {TaskKind::LengthQA, "Translate a duration of [seconds] seconds into frames.", "It corresponds to [frames] frames."},
};

}  // namespace

const std::vector<PromptTemplate>& template_bank() {
    static const std::vector<PromptTemplate> bank = [] {
        std::vector<PromptTemplate> b;
        b.reserve(std::size(kRows));
        long id = 0;
        for (const Row& r : kRows) b.push_back({id++, r.task, r.in, r.out});
        return b;
    }();
    return bank;
}

std::vector<PromptTemplate> templates_for(TaskKind task) {
    std::vector<PromptTemplate> out;
    for (const PromptTemplate& t : template_bank())
        if (t.task == task) out.push_back(t);
    return out;
}

}  // namespace molang
