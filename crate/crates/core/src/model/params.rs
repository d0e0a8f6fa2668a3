use crate::error::{Error, Result};
use crate::numeric::{Matrix, ParamStore, Scalar};

/// Walks every weight matrix under a name prefix.
pub trait Visit<T: Scalar> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix<T>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix<T>));

    fn to_store(&self, prefix: &str) -> ParamStore<T> {
        let mut store = ParamStore::new();
        self.visit(prefix, &mut |name, m| {
            store.insert(name, m.clone()).expect("visitor names are unique");
        });
        store
    }

    /// Copies matching slots from `store`; shapes must agree exactly.
    fn load_store(&mut self, prefix: &str, store: &ParamStore<T>) -> Result<()> {
        let mut failure = None;
        self.visit_mut(prefix, &mut |name, m| {
            if failure.is_some() {
                return;
            }
            match store.get(&name) {
                Some(src) if src.shape() == m.shape() => *m = src.clone(),
                Some(src) => {
                    failure = Some(Error::Checkpoint(format!(
                        "parameter `{name}` is {:?}, expected {:?}",
                        src.shape(),
                        m.shape()
                    )))
                }
                None => failure = Some(Error::Checkpoint(format!("missing parameter `{name}`"))),
            }
        });
        failure.map_or(Ok(()), Err)
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut Matrix<T>))
    where
        Self: Sized,
    {
        self.visit_mut("", &mut |_, m| f(m));
    }

    /// Sum of squares of every entry.
    fn sq_norm(&self) -> T
    where
        Self: Sized,
    {
        let mut acc = T::zero();
        self.visit("", &mut |_, m| acc += m.norm_sq());
        acc
    }
}

/// `target += scale * source`, slot by slot. Both must have the same layout.
pub fn axpy<T: Scalar, P: Visit<T>>(target: &mut P, source: &P, scale: T) {
    let mut sources = Vec::new();
    source.visit("", &mut |_, m| sources.push(m));
    let mut it = sources.into_iter();
    target.visit_mut("", &mut |_, m| {
        m.add_scaled(it.next().expect("same layout"), scale);
    });
}
