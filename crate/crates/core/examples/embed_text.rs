//! Hashed TF-IDF embeddings and their cosine similarities.
//!
//! cargo run --example embed_text [-- "text one" "text two" ...]

use source_tracing::embed::{embed_hashed_tfidf, tokenize, DEFAULT_EMBEDDING_DIM};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut texts: Vec<String> = std::env::args().skip(1).collect();
    if texts.is_empty() {
        texts = vec![
            "Semi-supervised classification with graph convolutional networks".into(),
            "We stack two graph convolution layers as proposed for semi-supervised node classification".into(),
            "Deep residual learning for image recognition".into(),
            "Residual connections ease optimization of very deep convolutional networks".into(),
        ];
    }
    let vectors = embed_hashed_tfidf(&texts, DEFAULT_EMBEDDING_DIM, 0)?;
    for (i, t) in texts.iter().enumerate() {
        println!("[{i}] {} tokens, norm {:.3}: {t}", tokenize(t).len(), vectors[i].norm());
    }
    print!("\n    ");
    for j in 0..texts.len() {
        print!("{j:>7}");
    }
    println!();
    for (i, a) in vectors.iter().enumerate() {
        print!("{i:>3} ");
        for b in &vectors {
            print!("{:>7.3}", a.cosine(b));
        }
        println!();
    }
    Ok(())
}
