//! Builds a thumbnail index over a phantom pool, queries it and round-trips
//! the index through its binary sidecar format.

use cxrpair::dataset::{generate_phantom_pool, Label};
use cxrpair::retrieval::{Class, ThumbIndex};

fn main() -> cxrpair::Result<()> {
    let pool = generate_phantom_pool(30, 3, 0.5)?;
    let class = |id: &str| match pool.annotations.get(id).unwrap().label {
        Label::Abnormal => Class::Abnormal,
        _ => Class::Normal,
    };
    let index = ThumbIndex::build(pool.images.iter().map(|(id, img)| (id.as_str(), class(id), img)))?;
    println!("{} entries: {} normal, {} abnormal", index.len(), index.count(Class::Normal), index.count(Class::Abnormal));

    let (qid, query) = pool.images.iter().find(|(id, _)| class(id) == Class::Abnormal).unwrap();
    for n in index.nearest(query, 3, Class::Normal, Some(qid))? {
        println!("  {qid} -> {} at {:.4}", n.id, n.distance);
    }

    let bytes = index.to_bytes();
    let back = ThumbIndex::from_bytes(&bytes)?;
    println!("sidecar: {} bytes, reloads identically: {}", bytes.len(), back == index);
    Ok(())
}
