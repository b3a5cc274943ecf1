//! Byte-level tokenizer: one token per UTF-8 byte plus three specials.

use alloc::string::String;
use alloc::vec::Vec;

pub type TokenId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub const BYTE_TOKENS: usize = 256;
    pub const BOS: TokenId = 256;
    pub const EOS: TokenId = 257;
    pub const PAD: TokenId = 258;
    pub const VOCAB_SIZE: usize = 259;

    pub fn vocab_size(&self) -> usize {
        Self::VOCAB_SIZE
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        text.bytes().map(TokenId::from).collect()
    }

    /// Decode byte tokens; special tokens are dropped.
    pub fn decode(&self, tokens: &[TokenId]) -> String {
        let bytes: Vec<u8> = tokens
            .iter()
            .filter(|&&t| (t as usize) < Self::BYTE_TOKENS)
            .map(|&t| t as u8)
            .collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }

    /// `(name, id)` pairs for the special tokens, in id order.
    pub fn special_tokens(&self) -> [(&'static str, TokenId); 3] {
        [("<s>", Self::BOS), ("</s>", Self::EOS), ("<pad>", Self::PAD)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip_and_specials_drop() {
        let tok = ByteTokenizer;
        let mut ids = tok.encode("héllo");
        assert_eq!(ids.len(), 6);
        ids.insert(0, ByteTokenizer::BOS);
        ids.push(ByteTokenizer::EOS);
        assert_eq!(tok.decode(&ids), "héllo");
    }
}
