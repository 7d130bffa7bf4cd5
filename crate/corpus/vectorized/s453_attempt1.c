#include <immintrin.h>

void s453(int *a, int *b, int n) {
    __m256i s_vec = _mm256_set1_epi32(0);
    __m256i two_vec = _mm256_set1_epi32(2);
    __m256i s_increment = _mm256_set1_epi32(16);
    int i = 0;
    for (; i <= n - 8; i += 8) {
        s_vec = _mm256_add_epi32(s_vec, two_vec);
        __m256i b_vec = _mm256_loadu_si256((__m256i*)&b[i]);
        __m256i a_vec = _mm256_mullo_epi32(s_vec, b_vec);
        _mm256_storeu_si256((__m256i*)&a[i], a_vec);
        s_vec = _mm256_add_epi32(s_vec, s_increment);
    }
}
