//! Turn a few aligned utterances into INTLV and ITTS records and tally them.

use speechtok::datapipe::{build_intlv, build_itts, corpus_stats, split_pair, AlignedPair, IntlvStart, Provenance, DEFAULT_PUNCTUATION};
use speechtok::stream::{build_loss_mask, Segment, SerializeOptions, TokenFrame};

fn frames(n: u32) -> Vec<TokenFrame> {
    (0..n).map(|i| TokenFrame::new(vec![i % 32, (i * 7) % 16])).collect()
}

fn main() -> speechtok::Result<()> {
    let utterances = [
        ("Good morning. The weather is clear today!", 40),
        ("Rain is expected tonight.", 22),
        ("天气很好。明天见！", 18),
    ];
    let mut pairs = Vec::new();
    for (text, n) in utterances {
        let pair = AlignedPair::new(text, frames(n), n as f64 / 12.5, Provenance::Crawl)?;
        pairs.extend(split_pair(&pair, DEFAULT_PUNCTUATION)?);
    }
    for p in &pairs {
        println!("{:>6.2}s {:>3} frames  {:?}", p.duration_s, p.frames.len(), p.text);
    }

    let records = [
        build_intlv(&pairs, IntlvStart::Audio, 0)?,
        build_intlv(&pairs, IntlvStart::Random, 17)?,
        build_itts(&pairs)?,
    ];
    for r in &records {
        let layout: Vec<String> = r
            .segments()
            .iter()
            .map(|s| match s {
                Segment::Text(t) => format!("T{}", t.len()),
                Segment::Audio(f) => format!("A{}", f.len()),
            })
            .collect();
        let mask = build_loss_mask(r, SerializeOptions::default());
        let trained = mask.flags().iter().filter(|&&f| f).count();
        println!("{:<5} {}  ({trained}/{} positions in the loss)", r.format(), layout.join(" "), mask.len());
    }

    // The INTLV records share their audio with the ITTS one; count it once.
    let seconds: f64 = pairs.iter().map(|p| p.duration_s).sum();
    let stats = corpus_stats(records[2..].iter().map(|r| (r, seconds)));
    println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialise"));
    Ok(())
}
