void s171(int n, int *a, int *b) {
    int inc = 1;
    for (int i = 0; i < n; i++) {
        a[i * inc] += b[i];
    }
}
