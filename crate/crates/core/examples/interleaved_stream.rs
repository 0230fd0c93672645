//! Serialize an ITTS record to its flat token sequence and show the loss mask.

use speechtok::stream::{
    build_loss_mask, deserialize, serialize, FormatTag, InterleavedStream, Segment, SerializeOptions, SpecialTokens, TokenFrame, Vocab, WireToken,
};

fn main() -> speechtok::Result<()> {
    let sizes = vec![16, 8, 8];
    let vocab = Vocab::new(SpecialTokens::default(), sizes.clone())?;
    let text = |s: &str| Segment::Text(s.chars().map(u32::from).collect());
    let audio = |n: u32| Segment::Audio((0..n).map(|i| TokenFrame::new(vec![i, i % 8, 7 - i % 8])).collect());
    let stream = InterleavedStream::new(FormatTag::Itts, vec![text("Hi."), audio(3), text("Bye."), audio(2)])?;

    for edge_switches in [false, true] {
        let opts = SerializeOptions { edge_switches };
        let wire = serialize(&stream, &vocab, opts)?;
        let mask = build_loss_mask(&stream, opts);
        println!("{} (edge switches: {edge_switches}), {} tokens", stream.format(), wire.len());
        for (tok, keep) in wire.iter().zip(mask.flags()) {
            let shown = match tok {
                WireToken::Text(id) if *id == vocab.special.switch_ta => "<text->audio>".to_string(),
                WireToken::Text(id) if *id == vocab.special.switch_at => "<audio->text>".to_string(),
                WireToken::Text(id) => format!("{:?}", char::from_u32(*id).unwrap_or('?')),
                WireToken::Audio(f) if f.is_eoa(&sizes) => "<eoa>".to_string(),
                WireToken::Audio(f) => format!("{:?}", f.indices()),
            };
            println!("  {:<15} {}", shown, if *keep { "loss" } else { "-" });
        }
        assert_eq!(deserialize(&wire, &vocab, stream.format(), opts)?, stream);
    }
    Ok(())
}
