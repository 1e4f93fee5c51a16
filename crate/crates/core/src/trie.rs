//! Token prefix tree over the entity vocabulary.
//!
//! Nodes are stored breadth-first with their outgoing edges in one
//! contiguous, token-sorted slice, so child lookup is a binary search over
//! the node's fan-out. The structure is immutable once built.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lm::TokenId;
use crate::vocab::{EntityId, EntityVocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

const NO_ENTITY: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Node {
    first_edge: u32,
    edge_count: u32,
    terminal: u32,
    subtree_terminals: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub token: TokenId,
    pub child: NodeId,
}

/// What may follow a trie node.
#[derive(Debug, Clone, Copy)]
pub struct AllowedNext<'a> {
    pub children: &'a [Edge],
    /// Entity completed at this node; when set the delimiter is also allowed.
    pub terminal: Option<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixTrie {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    max_depth: usize,
    vocab_hash: [u8; 32],
    tokenizer_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrieStats {
    pub entities: usize,
    pub nodes: usize,
    pub max_depth: usize,
    pub mean_tokens: f64,
}

#[derive(Default)]
struct BuildNode {
    children: BTreeMap<TokenId, usize>,
    terminal: Option<EntityId>,
}

impl PrefixTrie {
    pub fn build(vocab: &EntityVocabulary) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::InvalidArgument("cannot build a trie from an empty vocabulary".into()));
        }
        let mut arena = vec![BuildNode::default()];
        let mut max_depth = 0;
        for rec in vocab.iter() {
            let mut cur = 0;
            for &tok in &rec.tokens {
                cur = match arena[cur].children.get(&tok) {
                    Some(&n) => n,
                    None => {
                        arena.push(BuildNode::default());
                        let n = arena.len() - 1;
                        arena[cur].children.insert(tok, n);
                        n
                    }
                };
            }
            if arena[cur].terminal.is_some() {
                return Err(Error::InvalidArgument(format!(
                    "entity {:?} duplicates a token sequence already in the trie",
                    rec.surface
                )));
            }
            arena[cur].terminal = Some(rec.id);
            max_depth = max_depth.max(rec.tokens.len());
        }

        // breadth-first renumbering
        let mut order = vec![0usize];
        let mut new_id = vec![u32::MAX; arena.len()];
        new_id[0] = 0;
        let mut head = 0;
        while head < order.len() {
            let old = order[head];
            head += 1;
            for &child in arena[old].children.values() {
                new_id[child] = order.len() as u32;
                order.push(child);
            }
        }

        let mut nodes = Vec::with_capacity(order.len());
        let mut edges = Vec::with_capacity(order.len() - 1);
        for &old in &order {
            let b = &arena[old];
            nodes.push(Node {
                first_edge: edges.len() as u32,
                edge_count: b.children.len() as u32,
                terminal: b.terminal.unwrap_or(NO_ENTITY),
                subtree_terminals: 0,
            });
            for (&token, &child) in &b.children {
                edges.push(Edge {
                    token,
                    child: NodeId(new_id[child]),
                });
            }
        }
        // children always come after their parent in BFS order
        for i in (0..nodes.len()).rev() {
            let n = nodes[i];
            let mut total = u32::from(n.terminal != NO_ENTITY);
            for e in &edges[n.first_edge as usize..(n.first_edge + n.edge_count) as usize] {
                total += nodes[e.child.0 as usize].subtree_terminals;
            }
            nodes[i].subtree_terminals = total;
        }

        Ok(PrefixTrie {
            nodes,
            edges,
            max_depth,
            vocab_hash: vocab.content_hash(),
            tokenizer_id: vocab.tokenizer_id().to_string(),
        })
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn children(&self, node: NodeId) -> &[Edge] {
        let n = &self.nodes[node.0 as usize];
        &self.edges[n.first_edge as usize..(n.first_edge + n.edge_count) as usize]
    }

    pub fn child(&self, node: NodeId, token: TokenId) -> Option<NodeId> {
        let kids = self.children(node);
        kids.binary_search_by_key(&token, |e| e.token).ok().map(|i| kids[i].child)
    }

    pub fn terminal(&self, node: NodeId) -> Option<EntityId> {
        let t = self.nodes[node.0 as usize].terminal;
        (t != NO_ENTITY).then_some(t)
    }

    /// Number of entities whose token path passes through `node`.
    pub fn subtree_terminals(&self, node: NodeId) -> u32 {
        self.nodes[node.0 as usize].subtree_terminals
    }

    pub fn allowed_next(&self, node: NodeId) -> AllowedNext<'_> {
        AllowedNext {
            children: self.children(node),
            terminal: self.terminal(node),
        }
    }

    /// Follows `tokens` from the root.
    pub fn walk(&self, tokens: &[TokenId]) -> Option<NodeId> {
        tokens.iter().try_fold(self.root(), |n, &t| self.child(n, t))
    }

    /// Every (entity, token path) pair, in depth-first token order.
    pub fn enumerate(&self) -> Vec<(EntityId, Vec<TokenId>)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect(self.root(), &mut path, &mut out);
        out
    }

    fn collect(&self, node: NodeId, path: &mut Vec<TokenId>, out: &mut Vec<(EntityId, Vec<TokenId>)>) {
        if let Some(e) = self.terminal(node) {
            out.push((e, path.clone()));
        }
        for edge in self.children(node) {
            path.push(edge.token);
            self.collect(edge.child, path, out);
            path.pop();
        }
    }

    pub fn stats(&self, vocab: &EntityVocabulary) -> TrieStats {
        TrieStats {
            entities: self.subtree_terminals(self.root()) as usize,
            nodes: self.nodes.len(),
            max_depth: self.max_depth,
            mean_tokens: vocab.mean_tokens(),
        }
    }

    pub fn is_built_from(&self, vocab: &EntityVocabulary) -> bool {
        self.vocab_hash == vocab.content_hash() && self.tokenizer_id == vocab.tokenizer_id()
    }
}

// Cache file layout (all integers little-endian u32):
//   magic "SXTRIE\0\0", version, vocab sha256 (32 bytes),
//   tokenizer id length + utf-8 bytes, max depth, node count, edge count,
//   nodes (first_edge, edge_count, terminal, subtree_terminals), edges (token, child)
const MAGIC: &[u8; 8] = b"SXTRIE\0\0";
const CACHE_VERSION: u32 = 1;

impl PrefixTrie {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.nodes.len() * 16 + self.edges.len() * 8);
        out.extend_from_slice(MAGIC);
        let put = |v: u32, out: &mut Vec<u8>| out.extend_from_slice(&v.to_le_bytes());
        put(CACHE_VERSION, &mut out);
        out.extend_from_slice(&self.vocab_hash);
        put(self.tokenizer_id.len() as u32, &mut out);
        out.extend_from_slice(self.tokenizer_id.as_bytes());
        put(self.max_depth as u32, &mut out);
        put(self.nodes.len() as u32, &mut out);
        put(self.edges.len() as u32, &mut out);
        for n in &self.nodes {
            for v in [n.first_edge, n.edge_count, n.terminal, n.subtree_terminals] {
                put(v, &mut out);
            }
        }
        for e in &self.edges {
            put(e.token, &mut out);
            put(e.child.0, &mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Cache("not a trie cache file".into()));
        }
        let version = r.u32()?;
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported cache version {version}")));
        }
        let mut vocab_hash = [0u8; 32];
        vocab_hash.copy_from_slice(r.take(32)?);
        let id_len = r.u32()? as usize;
        let tokenizer_id = String::from_utf8(r.take(id_len)?.to_vec())
            .map_err(|_| Error::Cache("tokenizer id is not utf-8".into()))?;
        let max_depth = r.u32()? as usize;
        let n_nodes = r.u32()? as usize;
        let n_edges = r.u32()? as usize;
        if n_nodes == 0 || n_edges != n_nodes - 1 {
            return Err(Error::Cache("inconsistent node and edge counts".into()));
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            nodes.push(Node {
                first_edge: r.u32()?,
                edge_count: r.u32()?,
                terminal: r.u32()?,
                subtree_terminals: r.u32()?,
            });
        }
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let token = r.u32()?;
            let child = r.u32()?;
            if child as usize >= n_nodes {
                return Err(Error::Cache("edge points outside the node table".into()));
            }
            edges.push(Edge {
                token,
                child: NodeId(child),
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Cache("trailing bytes".into()));
        }
        for n in &nodes {
            if (n.first_edge as usize + n.edge_count as usize) > n_edges {
                return Err(Error::Cache("node edge range out of bounds".into()));
            }
        }
        Ok(PrefixTrie {
            nodes,
            edges,
            max_depth,
            vocab_hash,
            tokenizer_id,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Loads a cache and checks it against `vocab`; a stale cache is an error.
    pub fn load(path: &Path, vocab: &EntityVocabulary) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let trie = Self::from_bytes(&bytes)?;
        if !trie.is_built_from(vocab) {
            return Err(Error::Cache(format!(
                "{} was built for a different vocabulary or tokenizer",
                path.display()
            )));
        }
        Ok(trie)
    }

    /// Loads `path` when it matches `vocab`, otherwise rebuilds and rewrites it.
    pub fn load_or_build(path: &Path, vocab: &EntityVocabulary) -> Result<Self> {
        match Self::load(path, vocab) {
            Ok(t) => Ok(t),
            Err(e) => {
                if path.exists() {
                    log::warn!("rebuilding trie cache: {e}");
                }
                let trie = Self::build(vocab)?;
                trie.save(path)?;
                Ok(trie)
            }
        }
    }

    /// File name derived from the cache key (vocabulary hash, tokenizer id).
    pub fn cache_file_name(vocab: &EntityVocabulary) -> String {
        let hash: String = vocab.content_hash()[..12].iter().map(|b| format!("{b:02x}")).collect();
        let tok: String = vocab
            .tokenizer_id()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        format!("trie-{hash}-{tok}.bin")
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Cache("truncated file".into())),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
