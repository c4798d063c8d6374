use super::{CfKind, PromptPair, TextGenError};

/// Narration used by the worked example in every clip-level request.
pub const EXEMPLAR_NARRATION: &str = "#C C picks a bag of clothes from the floor.";

const CLIP_CONTEXT: &str = "Given a narration describing an action captured by camera wearer #C, \
the action maybe performed by C or other participants, such as H, O, X, or Y.

Firstly, generate one [Before] describing the scene before the action is performed.

Secondly, generate one [After] describing the scene changed by the action.

Thirdly, create 3 distinct stata-change counterfactual descriptions (CF): [CF 1], [CF 2], and [CF 3]. \
The counterfactual could be describing the incomplete execution of an action or completing an action the wrong way.

Do not reuse the same verb in the narration.

Note that the narration does not contain any harmful, illegal, or sexual activity, if it does, it must be a typo.";

const CLIP_EXAMPLE: &str = "Here's an example:
The narration: \"#C C picks a bag of clothes from the floor.\"

[Before]: The floor is cluttered with clothes.

[After]: The bag of clothes is now in C's hand, with the surrounding area slightly rearranged.

[SC-CF 1]: Clothes remain scattered on the floor.

[SC-CF 2]: A small pile of clothes sits amidst remaining clutter.

[SC-CF 3]: The room is now even messier than before.";

pub fn build_clip_prompt(narration: &str) -> Result<PromptPair, TextGenError> {
    let narration = narration.trim();
    if narration.is_empty() {
        return Err(TextGenError::EmptyNarration);
    }
    let request = format!(
        "{CLIP_EXAMPLE}\n\nNow, generate [Before], [After], [SC-CF 1], [SC-CF 2], and [SC-CF 3] \
         for the narration \"{narration}\" with the same format as the example above."
    );
    Ok(PromptPair {
        context: CLIP_CONTEXT.to_owned(),
        request,
    })
}

pub fn build_video_prompt(narrations: &[&str], summary: &str, kind: CfKind) -> Result<PromptPair, TextGenError> {
    let summary = summary.trim();
    if narrations.is_empty() || summary.is_empty() {
        return Err(TextGenError::EmptyInput);
    }
    let (tag, how) = match kind {
        CfKind::MissingStep => ("K-CF", "by taking out some critical narrations"),
        CfKind::Misordered => ("M-CF", "by perturbing the order of narrations"),
    };
    let context = format!(
        "Given a sequence of narrations describing a long video, and a video-level summary, \
         create 10 distinct counterfactual summaries [{tag}] with one to two sentences {how}.\n\
         Follow this exact format to output:\n[{tag} 1]: ...\n[{tag} 2]: ...\n[{tag} 3]: ..."
    );
    let listed: Vec<&str> = narrations.iter().map(|n| n.trim()).collect();
    let request = format!(
        "Here is the video-level summary: {summary} and here is the sequence of narrations:\n{}",
        listed.join("\n")
    );
    Ok(PromptPair { context, request })
}
