#![allow(dead_code)]

use mltt::tt::{ComponentTensor, TensorTrain};

/// Train of the sparse tensor `sum_t v_t e_{nu_t}`: one rank index per term.
pub fn sparse_train(dims: &[usize], terms: &[(Vec<usize>, f64)]) -> TensorTrain {
    let m = dims.len();
    let s = terms.len().max(1);
    if m == 1 {
        let comp = ComponentTensor::from_entries((1, dims[0], 1), terms.iter().map(|(nu, v)| (0, nu[0], 0, *v))).unwrap();
        return TensorTrain::new(vec![comp]).unwrap();
    }
    let mut comps = Vec::with_capacity(m);
    for (j, &d) in dims.iter().enumerate() {
        let shape = (if j == 0 { 1 } else { s }, d, if j == m - 1 { 1 } else { s });
        let entries = terms.iter().enumerate().map(|(t, (nu, v))| {
            let a = if j == 0 { 0 } else { t };
            let b = if j == m - 1 { 0 } else { t };
            (a, nu[j], b, if j == m - 1 { *v } else { 1.0 })
        });
        comps.push(ComponentTensor::from_entries(shape, entries).unwrap());
    }
    TensorTrain::new(comps).unwrap()
}

/// Lexicographic enumeration of `{0..=degree}^order`, first mode fastest.
pub fn grid_indices(order: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..order {
        let mut next = Vec::new();
        for k in 0..=degree {
            for nu in &out {
                let mut nu = nu.clone();
                nu.push(k);
                next.push(nu);
            }
        }
        out = next;
    }
    out
}
