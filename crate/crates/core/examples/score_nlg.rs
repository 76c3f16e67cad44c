//! Scores a few generated utterances with BLEU, METEOR and ROUGE.

use dialoforge::metrics::{meteor, rouge_pair, score_nlg, RougeVariant, ScoredPair};

fn main() -> anyhow::Result<()> {
    let pairs = [
        ("the phone number is 01223 812660 .", "the phone number is 01223 812660 ."),
        ("pizza hut is a cheap restaurant in the north .", "pizza hut is in the north and is cheap ."),
        ("what area would you like ?", "which part of town do you prefer ?"),
    ];
    let scored: Vec<ScoredPair> = pairs.iter().map(|(h, r)| ScoredPair::from_text(h, r)).collect();
    for (p, (h, _)) in scored.iter().zip(&pairs) {
        println!(
            "{h:<48} meteor {:.3}  rouge-2 {:.3}  rouge-L {:.3}",
            meteor(p),
            rouge_pair(p, RougeVariant::Two),
            rouge_pair(p, RougeVariant::L)
        );
    }
    let s = score_nlg(&scored)?;
    println!("\ncorpus: {}", serde_json::to_string(&s)?);
    println!("mean {:.4}", s.mean());
    Ok(())
}
