//! Worked generation examples parsed field for field, plus round trips
//! through the canonical renderers.

use procaware::textgen::{
    parse_clip_response, parse_video_response, render_clip_states, render_video_cfs, CfKind, ParsedClipStates,
    ParsedVideoCfs,
};
use proptest::prelude::*;

mod common;
use common::worked_examples::*;

fn clip(before: &str, after: &str, cfs: [&str; 3]) -> ParsedClipStates {
    ParsedClipStates {
        before: before.into(),
        after: after.into(),
        sc_cf: cfs.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn lifts_the_paper() {
    assert_eq!(
        parse_clip_response(LIFTS_THE_PAPER, 3).unwrap(),
        clip(
            "The paper lies flat on a table, surrounded by other papers and office supplies.",
            "The paper is now in C's hand, with the surrounding area slightly rearranged.",
            [
                "The paper remains flat on the table, untouched.",
                "A corner of the paper is folded up, but the rest remains flat.",
                "The paper has been torn in half, with one half on the table and the other half on the floor.",
            ],
        )
    );
}

#[test]
fn moves_her_hand() {
    assert_eq!(
        parse_clip_response(MOVES_HER_HAND, 3).unwrap(),
        clip(
            "C's hand is still in a neutral position, with her arm relaxed by her side.",
            "C's hand is now in motion, with her fingers waving gently in the air.",
            [
                "C's hand remains still, with no movement.",
                "C's hand is stuck in a awkward position, with her fingers curled up and her wrist twisted.",
                "C's hand has moved to a completely different location, with her arm now stretched out to the side.",
            ],
        )
    );
}

#[test]
fn fixes_the_camera() {
    assert_eq!(
        parse_clip_response(FIXES_THE_CAMERA, 3).unwrap(),
        clip(
            "The camera is not functioning properly, with a loose screw visible.",
            "The camera is now securely attached to C's head, with the loose screw tightened.",
            [
                "The camera remains loose, still not functioning properly.",
                "A makeshift fix is attempted, with tape holding the camera in place.",
                "The camera is now dangling precariously from C's head, held by a length of twine.",
            ],
        )
    );
}

#[test]
fn missing_step_summary_tag_is_stripped() {
    let v = parse_video_response(MISSING_STEP, CfKind::MissingStep, 2).unwrap();
    assert_eq!(
        v.cfs,
        vec![
            "C was in a room. C constructed a new structure with the paperwork pieces.",
            "C was in a room. C removed small pieces from a paperwork with a tool.",
        ]
    );
}

#[test]
fn misordered_examples() {
    let v = parse_video_response(MISORDERED, CfKind::Misordered, 2).unwrap();
    assert_eq!(
        v.cfs,
        vec![
            "C was in a room. C constructed a new structure with the paperwork pieces. C removed small pieces from the paperwork to create the craft.",
            "C was in a room. C removed small pieces from the paperwork with a tool. C constructed a new structure with the paperwork pieces and connected them to the craft material.",
        ]
    );
    assert!(parse_video_response(MISORDERED, CfKind::MissingStep, 2).is_err());
}

fn sentence() -> impl Strategy<Value = String> {
    (prop::collection::vec("[a-z]{1,8}", 1..10), prop::sample::select(vec![".", "!", ""])).prop_map(|(w, end)| {
        let mut s = w.join(" ");
        s[..1].make_ascii_uppercase();
        s + end
    })
}

fn distinct(v: Vec<String>) -> Vec<String> {
    v.into_iter().enumerate().map(|(i, s)| format!("{s} variant {i}")).collect()
}

proptest! {
    #[test]
    fn clip_states_round_trip(before in sentence(), after in sentence(), cfs in prop::collection::vec(sentence(), 1..6)) {
        let s = ParsedClipStates { before, after, sc_cf: distinct(cfs) };
        let text = render_clip_states(&s);
        prop_assert_eq!(parse_clip_response(&text, s.sc_cf.len()).unwrap(), s);
    }

    #[test]
    fn video_cfs_round_trip(cfs in prop::collection::vec(sentence(), 1..12), missing in any::<bool>()) {
        let kind = if missing { CfKind::MissingStep } else { CfKind::Misordered };
        let v = ParsedVideoCfs { kind, cfs: distinct(cfs) };
        let text = render_video_cfs(&v);
        prop_assert_eq!(parse_video_response(&text, kind, v.cfs.len()).unwrap(), v);
    }
}
